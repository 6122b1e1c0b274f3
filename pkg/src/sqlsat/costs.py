"""Cost model: selectivity estimates, per-class analysis, operator costs.

Cardinality rules: a scan returns its full table; a filter keeps
`sel(pred)` of its input; a projection keeps the input cardinality; a
join returns `n_l * n_r * sel(pred)`.  Selectivities: equality against
a constant is 1/ndv, equality of two columns is 1/max(ndv_l, ndv_r),
range comparisons are 1/3, conjunction multiplies, disjunction is
s1 + s2 - s1*s2, negation is 1 - s, and anything else is 0.5.

Operator costs: scan n*m (m = column count), filter n_in, project
n_in * m_out, nested-loop join n_l * n_r, hash join n_l + n_r + n_out.
Scalar operators and leaves cost 0, so predicate shape never competes
with table work.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .catalog import Catalog
from .errors import TypeMismatch
from .ir import ARITH_KINDS, CMP_KINDS, Col, RaExpr

_RANGE_SEL = 1.0 / 3.0
_UNKNOWN_SEL = 0.5

# Relative cardinality disagreement between merged classes that trips a
# diagnostic.
CARD_GAP = 0.05


@dataclass(frozen=True)
class ClassData:
    """Analysis value attached to every e-class.

    Relational classes use card/width_cols/width_bytes; scalar classes
    use sel and (for bare references) column.  `cols` is the output
    column set for relations and the referenced column set for scalars.
    `best_cost` is the cheapest way to realize any member, maintained
    incrementally; it matches what greedy extraction computes.
    """

    sort: str  # "rel" | "scalar"
    card: float = 0.0
    width_cols: int = 0
    width_bytes: float = 0.0
    cols: frozenset[Col] = frozenset()
    sel: float = 1.0
    column: Optional[Col] = None
    best_cost: float = 0.0


class CostAnalysis:
    """E-class analysis driven by catalog statistics."""

    def __init__(self, catalog: Catalog):
        self.catalog = catalog
        self.diagnostics: list[str] = []

    # `node` has canonical child class ids; `data_of` maps a class id to
    # its current ClassData.
    def make(self, node, data_of) -> ClassData:
        kind = node.kind
        ch = [data_of(c) for c in node.children]
        if kind == "scan":
            table, binding = node.payload
            stats = self.catalog.table(table)
            cols = frozenset(Col(table, c.name, binding) for c in stats.columns)
            width_bytes = float(sum(c.width_bytes for c in stats.columns))
            n, m = float(stats.row_count), len(stats.columns)
            return ClassData("rel", card=n, width_cols=m, width_bytes=width_bytes,
                             cols=cols, best_cost=n * m)
        if kind == "filter":
            pred, rel = ch
            card = pred.sel * rel.card
            return ClassData("rel", card=card, width_cols=rel.width_cols,
                             width_bytes=rel.width_bytes, cols=rel.cols,
                             best_cost=self._op_cost_from(kind, node.payload, ch)
                             + pred.best_cost + rel.best_cost)
        if kind == "project":
            (rel,) = ch
            cols = node.payload
            width_bytes = float(sum(self.catalog.column(c).width_bytes for c in cols))
            return ClassData("rel", card=rel.card, width_cols=len(cols),
                             width_bytes=width_bytes, cols=frozenset(cols),
                             best_cost=self._op_cost_from(kind, node.payload, ch)
                             + rel.best_cost)
        if kind == "join":
            pred, left, right = ch
            card = left.card * right.card * pred.sel
            return ClassData("rel", card=card,
                             width_cols=left.width_cols + right.width_cols,
                             width_bytes=left.width_bytes + right.width_bytes,
                             cols=left.cols | right.cols,
                             best_cost=self._op_cost_from(kind, node.payload, ch)
                             + pred.best_cost + left.best_cost + right.best_cost)
        if kind == "derived":
            # Identity on values and on cost.
            (rel,) = ch
            return rel

        # Scalar nodes: cost 0, selectivity per the estimate rules.
        cols = frozenset()
        for c in ch:
            cols |= c.cols
        best = sum(c.best_cost for c in ch)
        if kind == "col":
            ref: Col = node.payload
            stats = self.catalog.column(ref)
            sel = 1.0 / max(stats.ndv, 1) if stats.type == "bool" else 1.0
            return ClassData("scalar", cols=frozenset((ref,)), sel=sel,
                             column=ref, best_cost=0.0)
        if kind == "const":
            t, v = node.payload
            sel = (1.0 if v else 0.0) if t == "bool" else 1.0
            return ClassData("scalar", sel=sel, best_cost=0.0)
        if kind in ("eq", "ne"):
            sel = self._eq_sel(ch[0], ch[1])
            if kind == "ne":
                sel = 1.0 - sel
            return ClassData("scalar", cols=cols, sel=sel, best_cost=best)
        if kind in CMP_KINDS:
            return ClassData("scalar", cols=cols, sel=_RANGE_SEL, best_cost=best)
        if kind == "and":
            return ClassData("scalar", cols=cols, sel=ch[0].sel * ch[1].sel, best_cost=best)
        if kind == "or":
            s1, s2 = ch[0].sel, ch[1].sel
            return ClassData("scalar", cols=cols, sel=s1 + s2 - s1 * s2, best_cost=best)
        if kind == "not":
            return ClassData("scalar", cols=cols, sel=1.0 - ch[0].sel, best_cost=best)
        if kind in ARITH_KINDS:
            return ClassData("scalar", cols=cols, sel=_UNKNOWN_SEL, best_cost=best)
        raise TypeMismatch(f"no analysis for node kind {kind!r}")

    def _eq_sel(self, a: ClassData, b: ClassData) -> float:
        if a.column is not None and b.column is not None:
            na = self.catalog.column(a.column).ndv
            nb = self.catalog.column(b.column).ndv
            return 1.0 / max(na, nb, 1)
        for side in (a, b):
            if side.column is not None:
                return 1.0 / max(self.catalog.column(side.column).ndv, 1)
        return _UNKNOWN_SEL

    def _op_cost_from(self, kind: str, payload, ch: list[ClassData]) -> float:
        if kind == "scan":
            raise AssertionError("scan cost handled in make")
        if kind == "filter":
            return ch[1].card
        if kind == "project":
            return ch[0].card * len(payload)
        if kind == "join":
            pred, left, right = ch
            if payload == "hash":
                return left.card + right.card + left.card * right.card * pred.sel
            return left.card * right.card
        return 0.0

    def op_cost(self, node, data_of) -> float:
        """Cost of executing `node` itself, excluding its inputs."""
        if node.kind == "scan":
            stats = self.catalog.table(node.payload[0])
            return float(stats.row_count) * len(stats.columns)
        ch = [data_of(c) for c in node.children]
        return self._op_cost_from(node.kind, node.payload, ch)

    def join(self, a: ClassData, b: ClassData) -> ClassData:
        if a.sort != b.sort:
            raise TypeMismatch(f"merged classes of different sorts: {a.sort} vs {b.sort}")
        if a.sort == "rel" and min(a.card, b.card) >= 0:
            hi, lo = max(a.card, b.card), min(a.card, b.card)
            if hi > 0 and (hi - lo) / hi > CARD_GAP:
                self.diagnostics.append(
                    f"merged cardinalities differ by {100 * (hi - lo) / hi:.1f}%: "
                    f"{lo:.6g} vs {hi:.6g}")
        column = a.column if a.column is not None else b.column
        if a.column is not None and b.column is not None:
            column = min(a.column, b.column)
        return ClassData(
            sort=a.sort,
            card=min(a.card, b.card),
            width_cols=min(a.width_cols, b.width_cols) if a.sort == "rel" else 0,
            width_bytes=min(a.width_bytes, b.width_bytes),
            cols=a.cols | b.cols,
            sel=min(a.sel, b.sel),
            column=column,
            best_cost=min(a.best_cost, b.best_cost),
        )


def tree_analysis(expr: RaExpr, catalog: Catalog) -> ClassData:
    """Analyze a plain expression tree, sharing the e-class formulas.

    This is the tree-walk route used to cross-check extraction costs:
    `best_cost` here is the plan's total cost.
    """
    analysis = CostAnalysis(catalog)

    def walk(e: RaExpr) -> ClassData:
        datas = [walk(c) for c in e.children]

        class _Shim:
            kind = e.kind
            payload = e.payload
            children = tuple(range(len(datas)))

        return analysis.make(_Shim, lambda i: datas[i])

    return walk(expr)


def tree_cost(expr: RaExpr, catalog: Catalog) -> float:
    """Total cost of a plan tree (shared subtrees counted per use)."""
    return tree_analysis(expr, catalog).best_cost


def tree_card(expr: RaExpr, catalog: Catalog) -> float:
    return tree_analysis(expr, catalog).card
