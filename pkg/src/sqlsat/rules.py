"""The rewrite catalog and a randomized soundness harness.

34 rules in a frozen order: 15 relational, 9 arithmetic, 10 boolean.
The index of a rule in `catalog()` is its action id everywhere (CLI,
environment, bridge); the step environment appends one extra action for
plan reset.

Each rule carries `var_sorts`, a recipe the soundness harness uses to
draw random well-typed instantiations: relations become small random
tables, predicates are random boolean expressions over the columns the
rule is allowed to see, and guards are evaluated on the instantiated
trees through the same interface they use on e-classes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .egraph import PNode, PTag, PVar, Pattern, pattern_vars
from .errors import GuardUninstantiable
from .interp import compile_scalar, interpret
from .ir import (
    Col,
    ColumnDef,
    RaExpr,
    REL_KINDS,
    Relation,
    Schema,
    TableDef,
    bag_equal,
    output_columns,
    referenced_columns,
)

RULE_COUNT = 34


@dataclass(frozen=True)
class RewriteRule:
    name: str
    category: str  # "relational" | "math" | "boolean"
    lhs: Pattern
    rhs: Pattern
    note: str
    guard: Optional[Callable] = None
    var_sorts: dict = field(default_factory=dict)

    def __post_init__(self):
        lc, lt = pattern_vars(self.lhs)
        rc, rt = pattern_vars(self.rhs)
        if not (rc <= lc and rt <= lt):
            raise ValueError(f"rule {self.name}: rhs uses unbound variables")
        if lc & lt:
            raise ValueError(f"rule {self.name}: class and tag variables share a name")


def _n(kind: str, *children, payload=None) -> PNode:
    return PNode(kind, payload, tuple(children))


_TRUE = PNode("const", ("bool", True))
_FALSE = PNode("const", ("bool", False))


def _int(v: int) -> PNode:
    return PNode("const", ("int", v))


# -- guards -------------------------------------------------------------

def _g_push_left(ctx, s) -> bool:
    return ctx.prov(s["c"]) <= ctx.prov(s["a"])


def _g_push_right(ctx, s) -> bool:
    return ctx.prov(s["c"]) <= ctx.prov(s["b"])


def _g_proj_push(ctx, s) -> bool:
    return ctx.prov(s["c"]) <= frozenset(s["A"])


def _g_proj_merge(ctx, s) -> bool:
    return frozenset(s["A"]) <= frozenset(s["B"])


def _g_assoc_right(ctx, s) -> bool:
    return ctx.prov(s["p1"]) <= ctx.prov(s["b"]) | ctx.prov(s["cc"])


def _g_assoc_left(ctx, s) -> bool:
    return ctx.prov(s["p1"]) <= ctx.prov(s["a"]) | ctx.prov(s["b"])


def _g_equi(ctx, s) -> bool:
    """Does the predicate contain a conjunct equating one side's column
    expression with the other side's?"""
    pa, pb = ctx.prov(s["a"]), ctx.prov(s["b"])
    visited = set()

    def walk(ref, depth: int) -> bool:
        key = ctx.key(ref)
        if key in visited or depth > 6:
            return False
        visited.add(key)
        for kind, _, ch in ctx.nodes(ref):
            if kind == "eq":
                lp, rp = ctx.prov(ch[0]), ctx.prov(ch[1])
                if lp and rp and ((lp <= pa and rp <= pb) or (lp <= pb and rp <= pa)):
                    return True
            elif kind == "and":
                if walk(ch[0], depth + 1) or walk(ch[1], depth + 1):
                    return True
        return False

    return walk(s["p"], 0)


# -- the catalog --------------------------------------------------------

_CATALOG: Optional[tuple[RewriteRule, ...]] = None


def catalog() -> tuple[RewriteRule, ...]:
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = _build_catalog()
    return _CATALOG


def rule_index(name: str) -> int:
    for i, r in enumerate(catalog()):
        if r.name == name:
            return i
    raise KeyError(name)


def _build_catalog() -> tuple[RewriteRule, ...]:
    t, a, b, cc = PVar("t"), PVar("a"), PVar("b"), PVar("cc")
    c, c1, c2 = PVar("c"), PVar("c1"), PVar("c2")
    p, p1, p2 = PVar("p"), PVar("p1"), PVar("p2")
    x, y, z = PVar("x"), PVar("y"), PVar("z")
    A, B = PTag("A"), PTag("B")
    k, k1, k2, al = PTag("k"), PTag("k1"), PTag("k2"), PTag("al")

    rules: list[RewriteRule] = []

    def add(name, category, lhs, rhs, note, guard=None, **sorts):
        rules.append(RewriteRule(name, category, lhs, rhs, note, guard, dict(sorts)))

    # Relational (15)
    add("filter-merge", "relational",
        _n("filter", c1, _n("filter", c2, t)),
        _n("filter", _n("and", c1, c2), t),
        "two stacked filters equal one filter on the conjunction",
        t="rel", c1="bool:t", c2="bool:t")
    add("filter-split", "relational",
        _n("filter", _n("and", c1, c2), t),
        _n("filter", c1, _n("filter", c2, t)),
        "a conjunctive filter splits into a stack",
        t="rel", c1="bool:t", c2="bool:t")
    add("filter-push-left", "relational",
        _n("filter", c, _n("join", p, a, b, payload=k)),
        _n("join", p, _n("filter", c, a), b, payload=k),
        "a filter over a join moves to the left input it references",
        guard=_g_push_left,
        a="rel", b="rel", p="bool:a,b", c="bool:a", k="joinkind")
    add("filter-push-right", "relational",
        _n("filter", c, _n("join", p, a, b, payload=k)),
        _n("join", p, a, _n("filter", c, b), payload=k),
        "a filter over a join moves to the right input it references",
        guard=_g_push_right,
        a="rel", b="rel", p="bool:a,b", c="bool:b", k="joinkind")
    add("filter-into-join", "relational",
        _n("filter", c, _n("join", p, a, b, payload=k)),
        _n("join", _n("and", c, p), a, b, payload=k),
        "a filter over a join folds into the join predicate",
        a="rel", b="rel", p="bool:a,b", c="bool:a,b", k="joinkind")
    add("join-pred-pullup", "relational",
        _n("join", p, a, b, payload="inner"),
        _n("filter", p, _n("join", _TRUE, a, b, payload="inner")),
        "an inner join predicate lifts out as a filter over the cross join",
        a="rel", b="rel", p="bool:a,b")
    add("project-pushdown", "relational",
        _n("project", _n("filter", c, t), payload=A),
        _n("filter", c, _n("project", t, payload=A)),
        "a projection moves below a filter it still satisfies",
        guard=_g_proj_push,
        t="rel", A="cols:t", c="boolcols:A")
    add("project-merge", "relational",
        _n("project", _n("project", t, payload=B), payload=A),
        _n("project", t, payload=A),
        "nested projections collapse when the outer list is narrower",
        guard=_g_proj_merge,
        t="rel", B="cols:t", A="colsof:B")
    add("filter-true-elim", "relational",
        _n("filter", _TRUE, t), t,
        "filtering on true is a no-op",
        t="rel")
    add("derived-collapse", "relational",
        _n("derived", t, payload=al), t,
        "a derived table is the relation it wraps",
        t="rel", al="alias")
    add("filter-into-derived", "relational",
        _n("filter", c, _n("derived", t, payload=al)),
        _n("derived", _n("filter", c, t), payload=al),
        "a filter over a derived table moves inside it",
        t="rel", al="alias", c="bool:t")
    add("join-commute", "relational",
        _n("join", p, a, b, payload=k),
        _n("join", p, b, a, payload=k),
        "join inputs swap; output column order is not significant",
        a="rel", b="rel", p="bool:a,b", k="joinkind")
    add("join-assoc-right", "relational",
        _n("join", p1, _n("join", p2, a, b, payload=k2), cc, payload=k1),
        _n("join", p2, a, _n("join", p1, b, cc, payload=k1), payload=k2),
        "joins reassociate rightward when the outer predicate allows",
        guard=_g_assoc_right,
        a="rel", b="rel", cc="rel", p2="bool:a,b", p1="bool:b,cc",
        k1="joinkind", k2="joinkind")
    add("join-assoc-left", "relational",
        _n("join", p1, a, _n("join", p2, b, cc, payload=k2), payload=k1),
        _n("join", p2, _n("join", p1, a, b, payload=k1), cc, payload=k2),
        "joins reassociate leftward when the outer predicate allows",
        guard=_g_assoc_left,
        a="rel", b="rel", cc="rel", p2="bool:b,cc", p1="bool:a,b",
        k1="joinkind", k2="joinkind")
    add("join-to-hash", "relational",
        _n("join", p, a, b, payload="inner"),
        _n("join", p, a, b, payload="hash"),
        "an equi-join may run as a hash join",
        guard=_g_equi,
        a="rel", b="rel", p="equi:a,b")

    # Arithmetic (9)
    add("add-commute", "math", _n("add", x, y), _n("add", y, x),
        "x + y = y + x", x="sint", y="sint")
    add("mul-commute", "math", _n("mul", x, y), _n("mul", y, x),
        "x * y = y * x", x="sint", y="sint")
    add("add-assoc", "math",
        _n("add", _n("add", x, y), z), _n("add", x, _n("add", y, z)),
        "(x + y) + z = x + (y + z)", x="sint", y="sint", z="sint")
    add("mul-assoc", "math",
        _n("mul", _n("mul", x, y), z), _n("mul", x, _n("mul", y, z)),
        "(x * y) * z = x * (y * z)", x="sint", y="sint", z="sint")
    add("add-zero", "math", _n("add", x, _int(0)), x,
        "x + 0 = x", x="sint")
    add("mul-one", "math", _n("mul", x, _int(1)), x,
        "x * 1 = x", x="sint")
    add("mul-zero", "math", _n("mul", x, _int(0)), _int(0),
        "x * 0 = 0", x="sint")
    add("mul-two-shift", "math", _n("mul", x, _int(2)), _n("shl", x, _int(1)),
        "x * 2 = x << 1", x="sint")
    add("mul-div-cancel", "math",
        _n("div", _n("mul", x, _int(2)), _int(2)), x,
        "(x * 2) / 2 = x under truncating division", x="sint")

    # Boolean (10)
    add("and-commute", "boolean", _n("and", x, y), _n("and", y, x),
        "x and y = y and x", x="sbool", y="sbool")
    add("or-commute", "boolean", _n("or", x, y), _n("or", y, x),
        "x or y = y or x", x="sbool", y="sbool")
    add("and-assoc", "boolean",
        _n("and", _n("and", x, y), z), _n("and", x, _n("and", y, z)),
        "(x and y) and z = x and (y and z)", x="sbool", y="sbool", z="sbool")
    add("and-true", "boolean", _n("and", x, _TRUE), x,
        "x and true = x", x="sbool")
    add("or-false", "boolean", _n("or", x, _FALSE), x,
        "x or false = x", x="sbool")
    add("and-idem", "boolean", _n("and", x, x), x,
        "x and x = x", x="sbool")
    add("not-not", "boolean", _n("not", _n("not", x)), x,
        "not not x = x", x="sbool")
    add("demorgan-and", "boolean",
        _n("not", _n("and", x, y)), _n("or", _n("not", x), _n("not", y)),
        "not (x and y) = (not x) or (not y)", x="sbool", y="sbool")
    add("demorgan-or", "boolean",
        _n("not", _n("or", x, y)), _n("and", _n("not", x), _n("not", y)),
        "not (x or y) = (not x) and (not y)", x="sbool", y="sbool")
    add("not-eq-to-ne", "boolean",
        _n("not", _n("eq", x, y)), _n("ne", x, y),
        "not (x = y) = x != y", x="sint", y="sint")

    assert len(rules) == RULE_COUNT, len(rules)
    return tuple(rules)


# -- randomized soundness trials ----------------------------------------

class ExprGuardCtx:
    """Guard view of plain expression trees."""

    def __init__(self, schema: Schema):
        self.schema = schema

    def prov(self, ref: RaExpr) -> frozenset:
        if ref.kind in REL_KINDS:
            return frozenset(output_columns(ref, self.schema))
        return referenced_columns(ref)

    def nodes(self, ref: RaExpr):
        yield (ref.kind, ref.payload, ref.children)

    def key(self, ref: RaExpr):
        return id(ref)


class _TrialGen:
    """One random instantiation of a rule: tables, data, substitution."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.tables: list[TableDef] = []
        self.db: dict[str, list[tuple]] = {}
        self.fresh = 0

    def schema(self) -> Schema:
        return Schema(tuple(self.tables))

    def make_table(self, min_rows: int = 0) -> RaExpr:
        rng = self.rng
        name = f"t{len(self.tables)}"
        cols = [ColumnDef("a", "int", 4)]
        if rng.random() < 0.7:
            cols.append(ColumnDef("b", "int", 4))
        if rng.random() < 0.6:
            cols.append(ColumnDef("s", "str", 8))
        if rng.random() < 0.6:
            cols.append(ColumnDef("f", "bool", 1))
        self.tables.append(TableDef(name, tuple(cols)))
        n_rows = max(min_rows, rng.randint(0, 7))
        rows = []
        for _ in range(n_rows):
            row = []
            for cdef in cols:
                if cdef.type == "int":
                    row.append(rng.randint(0, 4))
                elif cdef.type == "str":
                    row.append(rng.choice(("x", "y", "z")))
                else:
                    row.append(rng.random() < 0.5)
            rows.append(tuple(row))
        self.db[name] = rows
        from .ir import scan
        return scan(name)

    def typed_cols(self, rel: RaExpr) -> list[tuple[Col, str]]:
        out = []
        for c in output_columns(rel, self.schema()):
            t = self.schema().table(c.table).column(c.column).type
            out.append((c, t))
        return out

    def gen_rel(self) -> RaExpr:
        from .ir import filter_
        base = self.make_table()
        if self.rng.random() < 0.3:
            return filter_(self.gen_bool(self.typed_cols(base), 1), base)
        return base

    def gen_int(self, cols: list[tuple[Col, str]], depth: int) -> RaExpr:
        from .ir import binop, col, const
        rng = self.rng
        ints = [c for c, t in cols if t == "int"]
        if depth <= 0 or rng.random() < 0.45:
            if ints and rng.random() < 0.75:
                return col(rng.choice(ints))
            return const("int", rng.randint(0, 4))
        op = rng.choice(("add", "sub", "mul"))
        return binop(op, self.gen_int(cols, depth - 1), self.gen_int(cols, depth - 1))

    def gen_bool(self, cols: list[tuple[Col, str]], depth: int) -> RaExpr:
        from .ir import binop, col, const, not_
        rng = self.rng
        if depth > 0 and rng.random() < 0.4:
            op = rng.choice(("and", "or", "not"))
            if op == "not":
                return not_(self.gen_bool(cols, depth - 1))
            return binop(op, self.gen_bool(cols, depth - 1), self.gen_bool(cols, depth - 1))
        ints = [c for c, t in cols if t == "int"]
        strs = [c for c, t in cols if t == "str"]
        bools = [c for c, t in cols if t == "bool"]
        options = []
        if ints:
            options += ["int_cmp", "int_eq"]
        if len(ints) >= 2:
            options += ["int_col_eq"]
        if strs:
            options += ["str_eq"]
        if bools:
            options += ["bool_col"]
        if not options:
            return const("bool", rng.random() < 0.5)
        match rng.choice(options):
            case "int_cmp":
                op = rng.choice(("lt", "gt", "le", "ge"))
                return binop(op, col(rng.choice(ints)), const("int", rng.randint(0, 4)))
            case "int_eq":
                op = rng.choice(("eq", "ne"))
                return binop(op, col(rng.choice(ints)), const("int", rng.randint(0, 4)))
            case "int_col_eq":
                l, r = rng.sample(ints, 2)
                return binop("eq", col(l), col(r))
            case "str_eq":
                return binop("eq", col(rng.choice(strs)),
                             const("str", rng.choice(("x", "y", "z"))))
            case _:
                return col(rng.choice(bools))

    def instantiate(self, rule: RewriteRule) -> dict:
        inst: dict = {}

        def cols_for(names: str) -> list[tuple[Col, str]]:
            out = []
            for n in names.split(","):
                out.extend(self.typed_cols(inst[n]))
            return out

        for name, sort in rule.var_sorts.items():
            kind, _, arg = sort.partition(":")
            match kind:
                case "rel":
                    inst[name] = self.gen_rel()
                case "bool":
                    inst[name] = self.gen_bool(cols_for(arg), 2)
                case "boolcols":
                    typed = [(c, self.schema().table(c.table).column(c.column).type)
                             for c in inst[arg]]
                    inst[name] = self.gen_bool(typed, 2)
                case "sint":
                    inst[name] = self.gen_int(self._scalar_cols(), 2)
                case "sbool":
                    inst[name] = self.gen_bool(self._scalar_cols(), 2)
                case "equi":
                    l, r = arg.split(",")
                    from .ir import binop, col
                    lints = [c for c, t in self.typed_cols(inst[l]) if t == "int"]
                    rints = [c for c, t in self.typed_cols(inst[r]) if t == "int"]
                    inst[name] = binop("eq", col(self.rng.choice(lints)),
                                       col(self.rng.choice(rints)))
                case "cols":
                    cols = list(output_columns(inst[arg], self.schema()))
                    n = self.rng.randint(1, len(cols))
                    inst[name] = tuple(self.rng.sample(cols, n))
                case "colsof":
                    base = list(inst[arg])
                    n = self.rng.randint(1, len(base))
                    inst[name] = tuple(self.rng.sample(base, n))
                case "joinkind":
                    inst[name] = self.rng.choice(("inner", "hash"))
                case "alias":
                    self.fresh += 1
                    inst[name] = f"d{self.fresh}"
                case _:
                    raise ValueError(f"unknown sort {sort!r}")
        return inst

    def _scalar_cols(self) -> list[tuple[Col, str]]:
        if not self.tables:
            self.make_table(min_rows=1)
        return self.typed_cols_of_first()

    def typed_cols_of_first(self) -> list[tuple[Col, str]]:
        t = self.tables[0]
        return [(Col(t.name, c.name, t.name), c.type) for c in t.columns]


def build_expr(pat: Pattern, inst: dict) -> RaExpr:
    """Instantiate a pattern as a plain expression tree."""
    if isinstance(pat, PVar):
        return inst[pat.name]
    payload = pat.payload
    if isinstance(payload, PTag):
        payload = inst[payload.name]
    return RaExpr(pat.kind, payload, tuple(build_expr(c, inst) for c in pat.children))


def soundness_check(rule: RewriteRule, trials: int = 200, seed: int = 0,
                    use_guard: bool = True) -> list[str]:
    """Check lhs == rhs on random instances; returns counterexamples.

    Relational rules are compared as bags through the interpreter;
    scalar rules are compared pointwise over the rows of a random table.
    """
    rng = random.Random(seed)
    failures: list[str] = []
    for trial in range(trials):
        gen = _TrialGen(rng)
        inst = None
        for _ in range(60):
            gen = _TrialGen(rng)
            candidate = gen.instantiate(rule)
            if use_guard and rule.guard is not None:
                if not rule.guard(ExprGuardCtx(gen.schema()), candidate):
                    continue
            inst = candidate
            break
        if inst is None:
            raise GuardUninstantiable(f"could not satisfy guard of {rule.name}")
        lhs = build_expr(rule.lhs, inst)
        rhs = build_expr(rule.rhs, inst)
        schema = gen.schema()
        if rule.category == "relational":
            out_l = interpret(lhs, gen.db, schema)
            out_r = interpret(rhs, gen.db, schema)
            if not bag_equal(out_l, out_r):
                failures.append(
                    f"trial {trial}: {lhs} != {rhs}; "
                    f"got {sorted(out_l.canonical()[1])} vs {sorted(out_r.canonical()[1])}")
        else:
            table = gen.tables[0]
            index = {Col(table.name, c.name, table.name): i
                     for i, c in enumerate(table.columns)}
            f_l = compile_scalar(lhs, index)
            f_r = compile_scalar(rhs, index)
            for row in gen.db[table.name]:
                vl, vr = f_l(row), f_r(row)
                if vl != vr:
                    failures.append(
                        f"trial {trial}: {lhs} = {vl!r} but {rhs} = {vr!r} on row {row}")
                    break
        if len(failures) >= 5:
            break
    return failures
