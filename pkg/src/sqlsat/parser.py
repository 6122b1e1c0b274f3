"""SQL front end for the supported subset.

Supported: SELECT with a column list or *, FROM with base tables, comma
joins, INNER JOIN .. ON, and parenthesized derived tables, plus WHERE
over scalar expressions (arithmetic, comparisons, boolean connectives).
Everything else raises UnsupportedFeature naming the construct.

Resolution happens here: every column reference in the produced plan is
a fully resolved `Col`, looked up through derived-table aliases down to
the base table binding.  Surface aliases do not survive into the IR.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import ParseError, TypeMismatch, UnknownColumn, UnknownTable, UnsupportedFeature
from .ir import (
    Col,
    RaExpr,
    Schema,
    TRUE,
    binop,
    const,
    col as col_expr,
    derived,
    filter_,
    join,
    not_,
    project,
    scan,
)

KEYWORDS = {
    "select", "from", "where", "as", "join", "inner", "on",
    "and", "or", "not", "true", "false",
}

# Recognized-but-rejected constructs, reported by name.
UNSUPPORTED_KEYWORDS = {
    "group": "GROUP BY", "order": "ORDER BY", "having": "HAVING",
    "union": "UNION", "intersect": "INTERSECT", "except": "EXCEPT",
    "limit": "LIMIT", "offset": "OFFSET", "distinct": "DISTINCT",
    "left": "outer join", "right": "outer join", "full": "outer join",
    "outer": "outer join", "cross": "CROSS JOIN", "natural": "NATURAL JOIN",
    "exists": "EXISTS", "is": "IS", "null": "NULL", "like": "LIKE",
    "between": "BETWEEN", "case": "CASE", "with": "WITH", "cast": "CAST",
}

_TOKEN_RE = re.compile(
    r"""\s*(?:
      (?P<int>\d+)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<str>'(?:[^']|'')*')
    | (?P<op><<|<=|>=|!=|<>|=|<|>|\+|-|\*|/|\(|\)|,|\.|;)
    )""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int" | "ident" | "str" | "op" | "eof"
    text: str
    pos: int

    @property
    def lower(self) -> str:
        return self.text.lower()


def tokenize(sql: str) -> list[Token]:
    toks: list[Token] = []
    i = 0
    while i < len(sql):
        m = _TOKEN_RE.match(sql, i)
        if m is None or m.end() == m.start():
            rest = sql[i:].lstrip()
            if not rest:
                break
            raise ParseError("unrecognized character", i, rest[0])
        for kind in ("int", "ident", "str", "op"):
            text = m.group(kind)
            if text is not None:
                toks.append(Token(kind, text, m.start(kind)))
                break
        i = m.end()
    toks.append(Token("eof", "", len(sql)))
    return toks


# -- surface AST --------------------------------------------------------

@dataclass
class SName:
    parts: list[str]
    pos: int


@dataclass
class SConst:
    type: str
    value: object
    pos: int


@dataclass
class SOp:
    kind: str
    args: list
    pos: int


@dataclass
class STable:
    name: str
    alias: Optional[str]
    pos: int


@dataclass
class SSub:
    query: "SQuery"
    alias: Optional[str]
    pos: int


@dataclass
class SJoin:
    left: object
    right: object
    on: object
    pos: int


@dataclass
class SQuery:
    star: bool
    items: list[tuple[SName, Optional[str]]]
    from_items: list
    where: Optional[object]
    pos: int


_CMP_TOKENS = {"=": "eq", "!=": "ne", "<>": "ne", "<": "lt", ">": "gt", "<=": "le", ">=": "ge"}
_ADD_TOKENS = {"+": "add", "-": "sub"}
_MUL_TOKENS = {"*": "mul", "/": "div", "<<": "shl"}


class _Parser:
    def __init__(self, sql: str):
        self.toks = tokenize(sql)
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        self.i += 1
        return t

    def error(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.pos, tok.text or "<end>")

    def reject_unsupported(self, tok: Token):
        if tok.kind == "ident" and tok.lower in UNSUPPORTED_KEYWORDS:
            raise UnsupportedFeature(f"{UNSUPPORTED_KEYWORDS[tok.lower]} is not supported")
        if tok.kind == "ident" and tok.lower == "in":
            if self.peek(1).text == "(" and self.peek(2).lower == "select":
                raise UnsupportedFeature("IN over nested query is not supported")
            raise UnsupportedFeature("IN list predicate is not supported")

    def expect_op(self, text: str) -> Token:
        t = self.peek()
        if t.kind == "op" and t.text == text:
            return self.next()
        self.error(f"expected {text!r}")

    def expect_kw(self, word: str) -> Token:
        t = self.peek()
        if t.kind == "ident" and t.lower == word:
            return self.next()
        self.reject_unsupported(t)
        self.error(f"expected {word.upper()}")

    def at_kw(self, *words: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.lower in words

    def ident(self, what: str) -> Token:
        t = self.peek()
        if t.kind != "ident":
            self.error(f"expected {what}")
        self.reject_unsupported(t)
        if t.lower in KEYWORDS:
            self.error(f"expected {what}")
        return self.next()

    # query := SELECT list FROM from_list [WHERE expr]
    def query(self) -> SQuery:
        start = self.expect_kw("select")
        star = False
        items: list[tuple[SName, Optional[str]]] = []
        if self.peek().text == "*":
            self.next()
            star = True
        else:
            items.append(self.select_item())
            while self.peek().text == ",":
                self.next()
                items.append(self.select_item())
        self.expect_kw("from")
        from_items = [self.join_tree()]
        while self.peek().text == ",":
            self.next()
            from_items.append(self.join_tree())
        where = None
        if self.at_kw("where"):
            self.next()
            where = self.expr()
        return SQuery(star, items, from_items, where, start.pos)

    def select_item(self) -> tuple[SName, Optional[str]]:
        t = self.peek()
        name = self.qualname()
        if self.peek().text == "(":
            raise UnsupportedFeature("function calls (including aggregates) are not supported")
        if len(name.parts) == 0:
            self.error("expected column reference", t)
        alias = None
        if self.at_kw("as"):
            self.next()
            alias = self.ident("alias").text
        elif self.peek().kind == "ident" and self.peek().lower not in KEYWORDS \
                and self.peek().lower not in UNSUPPORTED_KEYWORDS:
            alias = self.next().text
        return (name, alias)

    def qualname(self) -> SName:
        first = self.ident("identifier")
        parts = [first.text]
        if self.peek().text == ".":
            self.next()
            if self.peek().text == "*":
                raise UnsupportedFeature("qualified star is not supported")
            parts.append(self.ident("column name").text)
        return SName(parts, first.pos)

    def join_tree(self):
        item = self.table_primary()
        while True:
            if self.at_kw("inner") and self.peek(1).lower == "join":
                self.next()
            if not self.at_kw("join"):
                break
            pos = self.next().pos
            right = self.table_primary()
            self.expect_kw("on")
            on = self.expr()
            item = SJoin(item, right, on, pos)
        return item

    def table_primary(self):
        t = self.peek()
        if t.text == "(":
            self.next()
            sub = self.query()
            self.expect_op(")")
            alias = None
            if self.at_kw("as"):
                self.next()
                alias = self.ident("alias").text
            elif self.peek().kind == "ident" and self.peek().lower not in KEYWORDS \
                    and self.peek().lower not in UNSUPPORTED_KEYWORDS:
                alias = self.next().text
            return SSub(sub, alias, t.pos)
        name = self.ident("table name")
        alias = None
        if self.at_kw("as"):
            self.next()
            alias = self.ident("alias").text
        elif self.peek().kind == "ident" and self.peek().lower not in KEYWORDS \
                and self.peek().lower not in UNSUPPORTED_KEYWORDS:
            alias = self.next().text
        return STable(name.text, alias, name.pos)

    # precedence: or < and < not < cmp < add/sub < mul/div/shl < atom
    def expr(self):
        e = self.conjunction()
        while self.at_kw("or"):
            pos = self.next().pos
            e = SOp("or", [e, self.conjunction()], pos)
        return e

    def conjunction(self):
        e = self.negation()
        while self.at_kw("and"):
            pos = self.next().pos
            e = SOp("and", [e, self.negation()], pos)
        return e

    def negation(self):
        if self.at_kw("not"):
            pos = self.next().pos
            if self.at_kw("in") or (self.peek().kind == "ident"
                                    and self.peek().lower in UNSUPPORTED_KEYWORDS):
                self.reject_unsupported(self.peek())
            return SOp("not", [self.negation()], pos)
        return self.comparison()

    def comparison(self):
        left = self.additive()
        t = self.peek()
        self.reject_unsupported(t)
        if t.kind == "op" and t.text in _CMP_TOKENS:
            self.next()
            right = self.additive()
            return SOp(_CMP_TOKENS[t.text], [left, right], t.pos)
        return left

    def additive(self):
        e = self.multiplicative()
        while self.peek().kind == "op" and self.peek().text in _ADD_TOKENS:
            t = self.next()
            e = SOp(_ADD_TOKENS[t.text], [e, self.multiplicative()], t.pos)
        return e

    def multiplicative(self):
        e = self.atom()
        while self.peek().kind == "op" and self.peek().text in _MUL_TOKENS:
            t = self.next()
            e = SOp(_MUL_TOKENS[t.text], [e, self.atom()], t.pos)
        return e

    def atom(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            if self.peek().text == ".":
                raise UnsupportedFeature("decimal literals are not supported")
            return SConst("int", int(t.text), t.pos)
        if t.kind == "str":
            self.next()
            return SConst("str", t.text[1:-1].replace("''", "'"), t.pos)
        if t.text == "-" and self.peek(1).kind == "int":
            self.next()
            lit = self.next()
            return SConst("int", -int(lit.text), t.pos)
        if t.text == "(":
            self.next()
            if self.at_kw("select"):
                raise UnsupportedFeature("scalar subqueries are not supported")
            e = self.expr()
            self.expect_op(")")
            return e
        if t.kind == "ident":
            if t.lower in ("true", "false"):
                self.next()
                return SConst("bool", t.lower == "true", t.pos)
            self.reject_unsupported(t)
            if t.lower in KEYWORDS:
                self.error("expected expression")
            name = self.qualname()
            if self.peek().text == "(":
                raise UnsupportedFeature("function calls (including aggregates) are not supported")
            return name
        self.error("expected expression")

    def parse(self) -> SQuery:
        q = self.query()
        if self.peek().text == ";":
            self.next()
        t = self.peek()
        if t.kind != "eof":
            self.reject_unsupported(t)
            self.error("trailing input")
        return q


# -- resolution ---------------------------------------------------------

@dataclass
class _Binding:
    name: str
    # surface column name -> (resolved base column, value type)
    exports: list[tuple[str, Col, str]] = field(default_factory=list)


class _Resolver:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.subquery_count = 0
        # Bindings are query-global so a table scanned twice (directly or
        # inside a derived table) keeps distinct column identities.
        self.used_bindings: set[str] = set()

    def fresh_alias(self) -> str:
        self.subquery_count += 1
        return f"_sub{self.subquery_count}"

    def unique_binding(self, name: str) -> str:
        if name not in self.used_bindings:
            self.used_bindings.add(name)
            return name
        i = 2
        while f"{name}_{i}" in self.used_bindings:
            i += 1
        out = f"{name}_{i}"
        self.used_bindings.add(out)
        return out

    def resolve_query(self, q: SQuery) -> tuple[RaExpr, _Binding, bool]:
        """Returns (plan, export binding, had_star)."""
        plan: Optional[RaExpr] = None
        bindings: list[_Binding] = []
        names_in_scope: set[str] = set()

        def add_binding(b: _Binding):
            if b.name in names_in_scope:
                raise ParseError("duplicate table alias", q.pos, b.name)
            names_in_scope.add(b.name)
            bindings.append(b)

        def resolve_from(item) -> tuple[RaExpr, list[_Binding]]:
            if isinstance(item, STable):
                if not self.schema.has_table(item.name):
                    raise UnknownTable(f"no table {item.name!r}")
                surface = item.alias or item.name
                binding = self.unique_binding(surface)
                tdef = self.schema.table(item.name)
                b = _Binding(surface, [(c.name, Col(item.name, c.name, binding), c.type)
                                       for c in tdef.columns])
                return scan(item.name, binding), [b]
            if isinstance(item, SSub):
                # A derived table opens its own scope; its internal
                # aliases cannot clash with ours.
                sub_plan, sub_binding, _ = self.resolve_query(item.query)
                alias = item.alias or self.fresh_alias()
                sub_binding.name = alias
                return derived(alias, sub_plan), [sub_binding]
            if isinstance(item, SJoin):
                lp, lb = resolve_from(item.left)
                rp, rb = resolve_from(item.right)
                local = lb + rb
                seen = set()
                for b in local:
                    if b.name in seen:
                        raise ParseError("duplicate table alias", item.pos, b.name)
                    seen.add(b.name)
                on = self.resolve_scalar(item.on, local)
                self.require_bool(on, item.on)
                return join("inner", on, lp, rp), local
            raise AssertionError(f"unexpected from item {item!r}")

        for item in q.from_items:
            p, bs = resolve_from(item)
            for b in bs:
                add_binding(b)
            plan = p if plan is None else join("inner", TRUE, plan, p)
        assert plan is not None

        if q.where is not None:
            pred = self.resolve_scalar(q.where, bindings)
            self.require_bool(pred, q.where)
            plan = filter_(pred, plan)

        exports = _Binding("")
        if q.star:
            for b in bindings:
                exports.exports.extend(b.exports)
        else:
            for name, alias in q.items:
                resolved, vtype = self.lookup(name, bindings)
                surface = alias or name.parts[-1]
                exports.exports.append((surface, resolved, vtype))
            plan = project(tuple(c for _, c, _ in exports.exports), plan)
        return plan, exports, q.star

    def lookup(self, name: SName, bindings: list[_Binding]) -> tuple[Col, str]:
        if len(name.parts) == 2:
            qualifier, column = name.parts
            matches = [b for b in bindings if b.name == qualifier]
            if not matches:
                raise UnknownTable(f"no table or alias {qualifier!r} in scope")
            hits = [(c, t) for (surface, c, t) in matches[0].exports if surface == column]
            if not hits:
                raise UnknownColumn(f"no column {column!r} in {qualifier!r}")
        else:
            column = name.parts[0]
            hits = [(c, t) for b in bindings
                    for (surface, c, t) in b.exports if surface == column]
            if not hits:
                raise UnknownColumn(f"no column {column!r} in scope")
            if len(hits) > 1:
                raise ParseError("ambiguous column reference", name.pos, column)
        return hits[0]

    def resolve_scalar(self, e, bindings: list[_Binding]) -> RaExpr:
        if isinstance(e, SConst):
            return const(e.type, e.value)
        if isinstance(e, SName):
            c, _ = self.lookup(e, bindings)
            return col_expr(c)
        if isinstance(e, SOp):
            args = [self.resolve_scalar(a, bindings) for a in e.args]
            if e.kind == "not":
                return not_(args[0])
            return binop(e.kind, args[0], args[1])
        raise AssertionError(f"unexpected scalar {e!r}")

    def scalar_type_of(self, e: RaExpr) -> str:
        from .ir import ARITH_KINDS, CMP_KINDS

        match e.kind:
            case "col":
                tdef = self.schema.table(e.payload.table)
                return tdef.column(e.payload.column).type
            case "const":
                return e.payload[0]
            case k if k in ARITH_KINDS:
                for c in e.children:
                    if self.scalar_type_of(c) != "int":
                        raise TypeMismatch(f"{k} expects int operands")
                return "int"
            case k if k in CMP_KINDS:
                ta = self.scalar_type_of(e.children[0])
                tb = self.scalar_type_of(e.children[1])
                if ta != tb:
                    raise TypeMismatch(f"cannot compare {ta} with {tb}")
                if ta == "bool" and k not in ("eq", "ne"):
                    raise TypeMismatch("bool supports only = and !=")
                return "bool"
            case "and" | "or" | "not":
                for c in e.children:
                    if self.scalar_type_of(c) != "bool":
                        raise TypeMismatch(f"{e.kind} expects bool operands")
                return "bool"
            case _:
                raise TypeMismatch(f"unexpected scalar kind {e.kind!r}")

    def require_bool(self, e: RaExpr, surface) -> None:
        if self.scalar_type_of(e) != "bool":
            raise TypeMismatch("predicate must be boolean")


def parse(sql: str, schema: Schema) -> RaExpr:
    """Parse and resolve a query against `schema`.

    The result always has a Project at the root fixing the output column
    order.  A bare `select *` at a derived-table level adds no Project
    node, so identity projections do not pile up inside view nests.
    """
    q = _Parser(sql).parse()
    resolver = _Resolver(schema)
    plan, exports, star = resolver.resolve_query(q)
    if star:
        plan = project(tuple(c for _, c, _ in exports.exports), plan)
    return plan
