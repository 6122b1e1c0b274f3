"""Relational algebra IR, schemas, and in-memory relations.

Every plan and scalar expression is a `RaExpr`: an immutable node with a
kind, an optional hashable payload, and child expressions.  Column
references are fully resolved: each one carries the base table, the base
column, and the binding (alias) it was introduced under, so two scans of
the same table under different aliases never share references.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, NamedTuple

from .errors import TypeMismatch, UnknownColumn, UnknownTable

# Value types carried by columns and scalar expressions.
VALUE_TYPES = ("int", "str", "bool")

# Relational node kinds and scalar operator kinds.
REL_KINDS = ("scan", "filter", "project", "join", "derived")
ARITH_KINDS = ("add", "sub", "mul", "div", "shl")
CMP_KINDS = ("eq", "ne", "lt", "gt", "le", "ge")
BOOL_KINDS = ("and", "or", "not")
SCALAR_KINDS = ("col", "const") + ARITH_KINDS + CMP_KINDS + BOOL_KINDS

JOIN_KINDS = ("inner", "hash")


class Col(NamedTuple):
    """A resolved column reference: base table, base column, binding."""

    table: str
    column: str
    binding: str

    def __str__(self) -> str:
        return f"{self.binding}.{self.column}"


@dataclass(frozen=True)
class RaExpr:
    kind: str
    payload: Any = None
    children: tuple["RaExpr", ...] = ()

    def __str__(self) -> str:
        return pretty(self)


# -- constructors -------------------------------------------------------

def scan(table: str, binding: str | None = None) -> RaExpr:
    return RaExpr("scan", (table, binding or table))


def filter_(pred: RaExpr, child: RaExpr) -> RaExpr:
    return RaExpr("filter", None, (pred, child))


def project(cols: Iterable[Col], child: RaExpr) -> RaExpr:
    return RaExpr("project", tuple(cols), (child,))


def join(kind: str, pred: RaExpr, left: RaExpr, right: RaExpr) -> RaExpr:
    if kind not in JOIN_KINDS:
        raise ValueError(f"unknown join kind {kind!r}")
    return RaExpr("join", kind, (pred, left, right))


def derived(alias: str, child: RaExpr) -> RaExpr:
    return RaExpr("derived", alias, (child,))


def col(ref: Col) -> RaExpr:
    return RaExpr("col", ref)


def const(type_: str, value: Any) -> RaExpr:
    if type_ not in VALUE_TYPES:
        raise ValueError(f"unknown value type {type_!r}")
    return RaExpr("const", (type_, value))


TRUE = const("bool", True)
FALSE = const("bool", False)


def binop(kind: str, a: RaExpr, b: RaExpr) -> RaExpr:
    return RaExpr(kind, None, (a, b))


def not_(a: RaExpr) -> RaExpr:
    return RaExpr("not", None, (a,))


# -- schema and catalog-free typing ------------------------------------

@dataclass(frozen=True)
class ColumnDef:
    name: str
    type: str
    width_bytes: int


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...]

    def column(self, name: str) -> ColumnDef:
        for c in self.columns:
            if c.name == name:
                return c
        raise UnknownColumn(f"no column {name!r} in table {self.name!r}")


@dataclass(frozen=True)
class Schema:
    tables: tuple[TableDef, ...]

    def table(self, name: str) -> TableDef:
        for t in self.tables:
            if t.name == name:
                return t
        raise UnknownTable(f"no table {name!r}")

    def has_table(self, name: str) -> bool:
        return any(t.name == name for t in self.tables)


def output_columns(expr: RaExpr, schema: Schema) -> tuple[Col, ...]:
    """Ordered output columns of a relational expression."""
    match expr.kind:
        case "scan":
            table, binding = expr.payload
            tdef = schema.table(table)
            return tuple(Col(table, c.name, binding) for c in tdef.columns)
        case "filter":
            return output_columns(expr.children[1], schema)
        case "project":
            return expr.payload
        case "join":
            _, left, right = expr.children
            return output_columns(left, schema) + output_columns(right, schema)
        case "derived":
            return output_columns(expr.children[0], schema)
        case _:
            raise TypeMismatch(f"{expr.kind!r} is not a relational operator")


def referenced_columns(expr: RaExpr) -> frozenset[Col]:
    """All column references inside a scalar expression."""
    if expr.kind == "col":
        return frozenset((expr.payload,))
    out: set[Col] = set()
    for c in expr.children:
        out |= referenced_columns(c)
    return frozenset(out)


def scalar_type(expr: RaExpr, coltypes: dict[Col, str]) -> str:
    """Type of a scalar expression, checking operand types as it goes."""
    match expr.kind:
        case "col":
            if expr.payload not in coltypes:
                raise UnknownColumn(f"unresolved column {expr.payload}")
            return coltypes[expr.payload]
        case "const":
            return expr.payload[0]
        case k if k in ARITH_KINDS:
            for c in expr.children:
                if scalar_type(c, coltypes) != "int":
                    raise TypeMismatch(f"{k} expects int operands")
            return "int"
        case k if k in CMP_KINDS:
            ta = scalar_type(expr.children[0], coltypes)
            tb = scalar_type(expr.children[1], coltypes)
            if ta != tb:
                raise TypeMismatch(f"cannot compare {ta} with {tb}")
            if ta == "bool" and k not in ("eq", "ne"):
                raise TypeMismatch("bool supports only = and !=")
            return "bool"
        case "and" | "or" | "not":
            for c in expr.children:
                if scalar_type(c, coltypes) != "bool":
                    raise TypeMismatch(f"{expr.kind} expects bool operands")
            return "bool"
        case _:
            raise TypeMismatch(f"{expr.kind!r} is not a scalar operator")


def column_types(expr: RaExpr, schema: Schema) -> dict[Col, str]:
    """Types of every column visible anywhere inside a plan."""
    out: dict[Col, str] = {}

    def walk(e: RaExpr) -> None:
        if e.kind == "scan":
            table, binding = e.payload
            for cdef in schema.table(table).columns:
                out[Col(table, cdef.name, binding)] = cdef.type
        for c in e.children:
            walk(c)

    walk(expr)
    return out


def check_plan(expr: RaExpr, schema: Schema) -> tuple[Col, ...]:
    """Validate a plan: scopes, projections, predicate types.

    Returns the plan's output columns.
    """
    coltypes = column_types(expr, schema)

    def walk(e: RaExpr) -> tuple[Col, ...]:
        match e.kind:
            case "scan":
                return output_columns(e, schema)
            case "filter":
                pred, child = e.children
                cols = walk(child)
                if scalar_type(pred, coltypes) != "bool":
                    raise TypeMismatch("filter predicate must be bool")
                if not referenced_columns(pred) <= set(cols):
                    raise UnknownColumn("filter predicate escapes its scope")
                return cols
            case "project":
                cols = walk(e.children[0])
                for c in e.payload:
                    if c not in cols:
                        raise UnknownColumn(f"projected column {c} not in scope")
                return e.payload
            case "join":
                pred, left, right = e.children
                lc, rc = walk(left), walk(right)
                if set(lc) & set(rc):
                    raise TypeMismatch("join sides share a binding")
                if scalar_type(pred, coltypes) != "bool":
                    raise TypeMismatch("join predicate must be bool")
                if not referenced_columns(pred) <= set(lc) | set(rc):
                    raise UnknownColumn("join predicate escapes its scope")
                return lc + rc
            case "derived":
                return walk(e.children[0])
            case _:
                raise TypeMismatch(f"{e.kind!r} is not a relational operator")

    return walk(expr)


def collapse_derived(expr: RaExpr) -> RaExpr:
    """Strip derived-table wrappers; they are identities on values."""
    children = tuple(collapse_derived(c) for c in expr.children)
    if expr.kind == "derived":
        return children[0]
    if children == expr.children:
        return expr
    return RaExpr(expr.kind, expr.payload, children)


# -- relations ----------------------------------------------------------

@dataclass
class Relation:
    """A bag of rows with named, typed columns."""

    columns: tuple[Col, ...]
    types: tuple[str, ...]
    rows: list[tuple]

    def canonical(self) -> tuple:
        """Order-insensitive fingerprint: sort columns, then rows."""
        order = sorted(range(len(self.columns)), key=lambda i: self.columns[i])
        cols = tuple(self.columns[i] for i in order)
        rows = sorted(tuple(r[i] for i in order) for r in self.rows)
        return (cols, tuple(rows))


def bag_equal(a: Relation, b: Relation) -> bool:
    """Multiset equality up to column order."""
    return a.canonical() == b.canonical()


# -- pretty printing ----------------------------------------------------

_OP_TEXT = {
    "add": "+", "sub": "-", "mul": "*", "div": "/", "shl": "<<",
    "eq": "=", "ne": "!=", "lt": "<", "gt": ">", "le": "<=", "ge": ">=",
    "and": "and", "or": "or",
}


def pretty(expr: RaExpr) -> str:
    match expr.kind:
        case "scan":
            table, binding = expr.payload
            return table if binding == table else f"{table} as {binding}"
        case "filter":
            p, c = expr.children
            return f"filter[{pretty(p)}]({pretty(c)})"
        case "project":
            names = ", ".join(str(c) for c in expr.payload)
            return f"project[{names}]({pretty(expr.children[0])})"
        case "join":
            p, l, r = expr.children
            return f"join_{expr.payload}[{pretty(p)}]({pretty(l)}, {pretty(r)})"
        case "derived":
            return f"derived[{expr.payload}]({pretty(expr.children[0])})"
        case "col":
            return str(expr.payload)
        case "const":
            t, v = expr.payload
            if t == "str":
                return "'" + str(v).replace("'", "''") + "'"
            if t == "bool":
                return "true" if v else "false"
            return str(v)
        case "not":
            return f"not ({pretty(expr.children[0])})"
        case k if k in _OP_TEXT:
            a, b = expr.children
            return f"({pretty(a)} {_OP_TEXT[k]} {pretty(b)})"
        case _:
            return repr(expr)
