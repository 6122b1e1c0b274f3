"""Reference interpreter: bag semantics, operators, arithmetic edges."""

import random

import pytest

from sqlsat.errors import EvalError
from sqlsat.interp import interpret, trunc_div
from sqlsat.ir import (Col, ColumnDef, Relation, Schema, TableDef, bag_equal,
                       binop, col, const, derived, filter_, join, project,
                       scan)


def tiny_schema():
    return Schema((
        TableDef("r", (ColumnDef("a", "int", 4), ColumnDef("b", "int", 4))),
        TableDef("s", (ColumnDef("x", "int", 4), ColumnDef("y", "str", 8))),
    ))


def c(table, name):
    return Col(table, name, table)


def test_scan_keeps_duplicates():
    db = {"r": [(1, 2), (1, 2), (3, 4)], "s": []}
    out = interpret(scan("r"), db, tiny_schema())
    assert sorted(out.rows) == [(1, 2), (1, 2), (3, 4)]


def test_filter_on_computed_predicate():
    db = {"r": [(1, 2), (5, 1), (3, 3)], "s": []}
    pred = binop("gt", col(c("r", "a")), col(c("r", "b")))
    out = interpret(filter_(pred, scan("r")), db, tiny_schema())
    assert sorted(out.rows) == [(5, 1)]


def test_project_reorders_and_duplicates_columns():
    db = {"r": [(1, 2)], "s": []}
    out = interpret(project((c("r", "b"), c("r", "a"), c("r", "b")),
                            scan("r")), db, tiny_schema())
    assert out.rows == [(2, 1, 2)]


def test_join_is_a_filtered_cross_product():
    db = {"r": [(1, 10), (2, 20)], "s": [(1, "one"), (1, "uno"), (3, "tri")]}
    pred = binop("eq", col(c("r", "a")), col(c("s", "x")))
    out = interpret(join("inner", pred, scan("r"), scan("s")),
                    db, tiny_schema())
    assert sorted(out.rows) == [(1, 10, 1, "one"), (1, 10, 1, "uno")]


def test_hash_join_matches_inner_join():
    rng = random.Random(17)
    schema = tiny_schema()
    for _ in range(50):
        db = {
            "r": [(rng.randrange(5), rng.randrange(5)) for _ in range(rng.randrange(8))],
            "s": [(rng.randrange(5), rng.choice("pqrs")) for _ in range(rng.randrange(8))],
        }
        pred = binop("eq", col(c("r", "a")), col(c("s", "x")))
        inner = interpret(join("inner", pred, scan("r"), scan("s")), db, schema)
        hashed = interpret(join("hash", pred, scan("r"), scan("s")), db, schema)
        assert bag_equal(inner, hashed), db


def test_derived_is_transparent():
    db = {"r": [(1, 2), (3, 4)], "s": []}
    pred = binop("lt", col(c("r", "a")), const("int", 3))
    base = filter_(pred, scan("r"))
    wrapped = derived("sub", base)
    assert bag_equal(interpret(base, db, tiny_schema()),
                     interpret(wrapped, db, tiny_schema()))


def test_trunc_div_matches_c_semantics():
    # Division truncates toward zero, unlike Python floor division.
    assert trunc_div(7, 2) == 3
    assert trunc_div(-7, 2) == -3
    assert trunc_div(7, -2) == -3
    assert trunc_div(-7, -2) == 3


def test_division_by_zero_rows_fail_loud():
    db = {"r": [(1, 0)], "s": []}
    pred = binop("eq", binop("div", col(c("r", "a")), col(c("r", "b"))),
                 const("int", 1))
    with pytest.raises(EvalError):
        interpret(filter_(pred, scan("r")), db, tiny_schema())


def test_bag_equal_is_order_insensitive_but_count_sensitive():
    x = (Col("t", "x", "t"),)
    a = Relation(x, ("int",), [(1,), (2,), (1,)])
    b = Relation(x, ("int",), [(2,), (1,), (1,)])
    c_ = Relation(x, ("int",), [(1,), (2,)])
    assert bag_equal(a, b)
    assert not bag_equal(a, c_)
