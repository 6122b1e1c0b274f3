"""Exception types shared across the package."""


class SqlsatError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SqlsatError):
    """Malformed query text. Carries the offset and offending token."""

    def __init__(self, message: str, position: int, token: str):
        super().__init__(f"{message} at offset {position}: {token!r}")
        self.position = position
        self.token = token


class UnsupportedFeature(SqlsatError):
    """Syntactically valid SQL outside the supported subset."""


class UnknownTable(SqlsatError):
    pass


class UnknownColumn(SqlsatError):
    pass


class TypeMismatch(SqlsatError):
    pass


class EvalError(SqlsatError):
    """Runtime failure in the interpreter (bad operand, division by zero)."""


class MissingStatistics(SqlsatError):
    """The catalog lacks an entry required by the cost model."""


class NodeBudgetExceeded(SqlsatError):
    """An insertion would push the e-graph past its node limit."""


class StaleSnapshot(SqlsatError):
    """A snapshot was restored into a different graph than it came from."""


class NoFiniteExtraction(SqlsatError):
    """Every derivation of the root class loops through its own class."""


class IlpCapExceeded(SqlsatError):
    """The e-graph is larger than the exact extractor is willing to encode."""


class BudgetExhausted(SqlsatError):
    """Solver hit its time budget. Carries the incumbent found so far."""

    def __init__(self, message: str, incumbent=None):
        super().__init__(message)
        self.incumbent = incumbent


class InvalidAction(SqlsatError):
    pass


class EpisodeFinished(SqlsatError):
    """step() was called after the episode horizon was reached."""


class VocabularyOverflow(SqlsatError):
    """An operator fell outside the fixed encoding vocabulary."""


class GuardUninstantiable(SqlsatError):
    """The trial generator could not satisfy a rule guard."""


class NoApplicableAction(SqlsatError):
    pass
