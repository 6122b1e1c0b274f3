"""Cost model: tree-walk totals agree with the e-class analysis route."""

import random

from sqlsat.costs import CostAnalysis, tree_card, tree_cost
from sqlsat.datagen import QUERIES, generate
from sqlsat.egraph import EGraph
from sqlsat.extract import greedy_extract
from sqlsat.ir import Col, binop, col, const, filter_, join, project, scan
from sqlsat.parser import parse

DB, CATALOG = generate()
SCHEMA = CATALOG.schema()


def graph_cost(expr):
    """Best cost of the root class with the expression alone in a graph."""
    g = EGraph(analysis=CostAnalysis(CATALOG))
    root = g.add_expr(expr)
    g.rebuild()
    return g.data(g.find(root)).best_cost


def test_fixture_costs_agree_between_routes():
    # Same plan, two independent paths: plain tree walk vs e-class
    # analysis inside a fresh graph.
    for name, sql in QUERIES.items():
        expr = parse(sql, SCHEMA)
        via_tree = tree_cost(expr, CATALOG)
        via_graph = graph_cost(expr)
        assert abs(via_tree - via_graph) < 1e-6, name


def test_greedy_extract_total_matches_analysis_best_cost():
    for name, sql in QUERIES.items():
        expr = parse(sql, SCHEMA)
        g = EGraph(analysis=CostAnalysis(CATALOG))
        root = g.add_expr(expr)
        g.rebuild()
        got = greedy_extract(g, g.find(root))
        assert abs(got.total_cost - g.data(g.find(root)).best_cost) < 1e-6, name


def test_scan_cost_is_rows_times_columns():
    stats = CATALOG.table("orders")
    expr = scan("orders")
    want = stats.row_count * len(stats.columns)
    assert tree_cost(expr, CATALOG) == want


def test_filter_reduces_cardinality():
    oc = Col("orders", "o_totalprice", "orders")
    pred = binop("gt", col(oc), const("int", 40000))
    expr = filter_(pred, scan("orders"))
    assert tree_card(expr, CATALOG) < tree_card(scan("orders"), CATALOG)


def test_equality_join_selectivity_uses_distinct_counts():
    lc = Col("orders", "o_custkey", "orders")
    rc = Col("customer", "c_custkey", "customer")
    pred = binop("eq", col(lc), col(rc))
    expr = join("inner", pred, scan("orders"), scan("customer"))
    n_orders = tree_card(scan("orders"), CATALOG)
    n_customer = tree_card(scan("customer"), CATALOG)
    ndv = max(CATALOG.column(lc).ndv, CATALOG.column(rc).ndv)
    want = n_orders * n_customer / ndv
    assert abs(tree_card(expr, CATALOG) - want) < 1e-6


def test_pushdown_is_cheaper_on_selective_filters():
    # Filtering before the join must cost less than after, which is the
    # signal the whole rewriting setup exists to exploit.
    oc = Col("orders", "o_totalprice", "orders")
    key_l = Col("orders", "o_custkey", "orders")
    key_r = Col("customer", "c_custkey", "customer")
    on = binop("eq", col(key_l), col(key_r))
    sel = binop("gt", col(oc), const("int", 40000))
    after = filter_(sel, join("inner", on, scan("orders"), scan("customer")))
    before = join("inner", on, filter_(sel, scan("orders")), scan("customer"))
    assert tree_cost(before, CATALOG) < tree_cost(after, CATALOG)


def test_cost_stays_consistent_under_rewriting():
    # After arbitrary legal rewrites the analysis best_cost of the root
    # must still equal what greedy extraction realizes.
    from sqlsat.env import EnvConfig, RewriteEnv

    rng = random.Random(31)
    for name in ("nested_filters", "join3"):
        expr = parse(QUERIES[name], SCHEMA)
        env = RewriteEnv(expr, CATALOG, EnvConfig(node_limit=500, horizon=30))
        obs = env.reset()
        for _ in range(15):
            legal = [i for i, ok in enumerate(obs.mask) if ok]
            obs = env.step(rng.choice(legal)).obs
        got = greedy_extract(env.g, env.root)
        assert abs(got.total_cost - env.current_cost()) < 1e-6, name
