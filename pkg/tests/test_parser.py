"""SQL front end: parsing, name resolution, emission round-trips."""

import pytest

from sqlsat.datagen import QUERIES, UNSUPPORTED_QUERIES, generate
from sqlsat.emit import emit_sql
from sqlsat.errors import (ParseError, UnknownColumn, UnknownTable,
                           UnsupportedFeature)
from sqlsat.interp import interpret
from sqlsat.ir import bag_equal, check_plan
from sqlsat.parser import parse

DB, CATALOG = generate()
SCHEMA = CATALOG.schema()


def test_fixture_queries_parse_and_typecheck():
    for name, sql in QUERIES.items():
        expr = parse(sql, SCHEMA)
        cols = check_plan(expr, SCHEMA)
        assert cols, name


def test_emit_parse_roundtrip_preserves_semantics():
    for name, sql in QUERIES.items():
        expr = parse(sql, SCHEMA)
        text = emit_sql(expr, SCHEMA)
        again = parse(text, SCHEMA)
        out1 = interpret(expr, DB, SCHEMA)
        out2 = interpret(again, DB, SCHEMA)
        assert bag_equal(out1, out2), (name, text)


def test_emitted_text_is_stable():
    for name, sql in QUERIES.items():
        expr = parse(sql, SCHEMA)
        text = emit_sql(expr, SCHEMA)
        expr2 = parse(text, SCHEMA)
        assert emit_sql(expr2, SCHEMA) == text, name


def test_self_join_through_subquery_keeps_identities_apart():
    # Both sides of the join read `orders`; the derived table's columns
    # must not collapse into the outer scan's.
    expr = parse(QUERIES["pg_original"], SCHEMA)
    out = interpret(expr, DB, SCHEMA)
    want = interpret(parse(QUERIES["pg_optimal"], SCHEMA), DB, SCHEMA)
    assert bag_equal(out, want)


def test_plain_select_star_like_projection():
    expr = parse("select o_orderkey, o_totalprice from orders", SCHEMA)
    out = interpret(expr, DB, SCHEMA)
    assert len(out.rows) == len(DB["orders"])


def test_where_precedence_and_parens():
    a = parse("select v from t where c1 and c2 or v > 10", SCHEMA)
    b = parse("select v from t where (c1 and c2) or (v > 10)", SCHEMA)
    assert bag_equal(interpret(a, DB, SCHEMA), interpret(b, DB, SCHEMA))


def test_unknown_table_and_column_errors():
    with pytest.raises(UnknownTable):
        parse("select x from nosuch", SCHEMA)
    with pytest.raises(UnknownColumn):
        parse("select nosuch from orders", SCHEMA)
    with pytest.raises(UnknownColumn):
        parse("select o_orderkey from orders, customer where foo = 1", SCHEMA)


def test_unsupported_features_are_reported_not_mangled():
    for name, sql in UNSUPPORTED_QUERIES.items():
        with pytest.raises(UnsupportedFeature):
            parse(sql, SCHEMA)
    with pytest.raises(UnsupportedFeature):
        parse("select count(o_orderkey) from orders", SCHEMA)


def test_malformed_sql_raises_parse_error():
    for sql in ("select", "select from orders", "select a from", "",
                "select a from t where", "select a a a from t"):
        with pytest.raises((ParseError, UnknownColumn, UnknownTable)):
            parse(sql, SCHEMA)


def test_string_literals_and_quotes():
    expr = parse("select o_orderkey from orders where o_orderstatus = 'F'",
                 SCHEMA)
    out = interpret(expr, DB, SCHEMA)
    statuses = {r[2] for r in DB["orders"]}
    assert "F" in statuses
    assert all(len(r) == 1 for r in out.rows)
