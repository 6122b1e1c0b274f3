"""Reference interpreter with bag semantics.

This is the ground truth the rewrite engine is checked against, so it
stays deliberately naive: joins are nested loops regardless of the
physical kind, and nothing is pushed, fused, or reordered.
"""

from __future__ import annotations

from typing import Any, Callable

from .errors import EvalError
from .ir import (
    ARITH_KINDS,
    CMP_KINDS,
    Col,
    RaExpr,
    Relation,
    Schema,
    output_columns,
)

# A database maps table name to rows in schema column order.
Database = dict[str, list[tuple]]


def trunc_div(a: int, b: int) -> int:
    """Integer division truncating toward zero, like SQL."""
    if b == 0:
        raise EvalError("division by zero")
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def _shl(a: int, b: int) -> int:
    if not 0 <= b <= 63:
        raise EvalError(f"shift amount {b} out of range")
    return a << b


_ARITH: dict[str, Callable[[int, int], int]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": trunc_div,
    "shl": _shl,
}

_CMP: dict[str, Callable[[Any, Any], bool]] = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a < b,
    "gt": lambda a, b: a > b,
    "le": lambda a, b: a <= b,
    "ge": lambda a, b: a >= b,
}


def compile_scalar(expr: RaExpr, index: dict[Col, int]) -> Callable[[tuple], Any]:
    """Compile a scalar expression to a row function over `index`."""
    match expr.kind:
        case "col":
            try:
                i = index[expr.payload]
            except KeyError:
                raise EvalError(f"column {expr.payload} not in scope") from None
            return lambda row: row[i]
        case "const":
            v = expr.payload[1]
            return lambda row: v
        case k if k in ARITH_KINDS:
            fa = compile_scalar(expr.children[0], index)
            fb = compile_scalar(expr.children[1], index)
            op = _ARITH[k]
            return lambda row: op(fa(row), fb(row))
        case k if k in CMP_KINDS:
            fa = compile_scalar(expr.children[0], index)
            fb = compile_scalar(expr.children[1], index)
            op = _CMP[k]
            return lambda row: op(fa(row), fb(row))
        case "and":
            fa = compile_scalar(expr.children[0], index)
            fb = compile_scalar(expr.children[1], index)
            return lambda row: fa(row) and fb(row)
        case "or":
            fa = compile_scalar(expr.children[0], index)
            fb = compile_scalar(expr.children[1], index)
            return lambda row: fa(row) or fb(row)
        case "not":
            fa = compile_scalar(expr.children[0], index)
            return lambda row: not fa(row)
        case _:
            raise EvalError(f"{expr.kind!r} is not a scalar operator")


def interpret(expr: RaExpr, db: Database, schema: Schema) -> Relation:
    """Evaluate a plan over `db`, returning a bag of rows."""
    coltypes: dict[tuple[str, str], str] = {}
    for tdef in schema.tables:
        for cdef in tdef.columns:
            coltypes[(tdef.name, cdef.name)] = cdef.type

    def type_of(c: Col) -> str:
        return coltypes[(c.table, c.column)]

    def walk(e: RaExpr) -> Relation:
        match e.kind:
            case "scan":
                table, _ = e.payload
                cols = output_columns(e, schema)
                if table not in db:
                    raise EvalError(f"no data for table {table!r}")
                return Relation(cols, tuple(type_of(c) for c in cols), list(db[table]))
            case "filter":
                pred_e, child_e = e.children
                child = walk(child_e)
                idx = {c: i for i, c in enumerate(child.columns)}
                pred = compile_scalar(pred_e, idx)
                rows = [r for r in child.rows if pred(r) is True]
                return Relation(child.columns, child.types, rows)
            case "project":
                child = walk(e.children[0])
                idx = {c: i for i, c in enumerate(child.columns)}
                try:
                    pick = [idx[c] for c in e.payload]
                except KeyError as exc:
                    raise EvalError(f"projected column {exc.args[0]} not in scope") from None
                types = tuple(child.types[i] for i in pick)
                rows = [tuple(r[i] for i in pick) for r in child.rows]
                return Relation(tuple(e.payload), types, rows)
            case "join":
                pred_e, left_e, right_e = e.children
                left, right = walk(left_e), walk(right_e)
                cols = left.columns + right.columns
                idx = {c: i for i, c in enumerate(cols)}
                pred = compile_scalar(pred_e, idx)
                rows = []
                for lr in left.rows:
                    for rr in right.rows:
                        row = lr + rr
                        if pred(row) is True:
                            rows.append(row)
                return Relation(cols, left.types + right.types, rows)
            case "derived":
                return walk(e.children[0])
            case _:
                raise EvalError(f"{e.kind!r} is not a relational operator")

    return walk(expr)
