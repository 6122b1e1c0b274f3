"""Benchmark runner: cell grid, CSV rendering, golden output, traces."""

from pathlib import Path

from sqlsat.bench import (CSV_COLUMNS, CSV_VERSION, BenchSpec, render_csv,
                          render_summary, render_trace_csv, run_bench,
                          trace_egg)
from sqlsat.datagen import generate

DATA = Path(__file__).parent / "data"

SMALL = BenchSpec(queries=("nested_filters", "join3"),
                  agents=("egg", "random"), seeds=(0, 1), rollouts=3,
                  horizon=15, node_limit=300, patience=5, ilp_pops=2000)


def test_small_bench_matches_golden_csv():
    report = run_bench(SMALL)
    want = (DATA / "bench_small.csv").read_text()
    assert render_csv(report.cells) == want


def test_cell_grid_shape():
    report = run_bench(SMALL)
    # Deterministic agents get one row per query; stochastic one per seed.
    want = len(SMALL.queries) * (1 + len(SMALL.seeds))
    assert len(report.cells) == want
    for cell in report.cells:
        assert cell.verified
        assert cell.note == ""
        assert cell.best_cost <= cell.median_cost <= cell.worst_cost


def test_csv_header_is_versioned():
    report = run_bench(SMALL)
    text = render_csv(report.cells)
    header, first = text.splitlines()[:2]
    assert header == ",".join(CSV_COLUMNS)
    assert first.startswith(f"{CSV_VERSION},")


def test_parallel_run_equals_serial():
    serial = run_bench(SMALL)
    parallel = run_bench(BenchSpec(**{**SMALL.__dict__, "workers": 2}))
    assert render_csv(serial.cells) == render_csv(parallel.cells)


def test_summary_mentions_every_agent_and_query():
    report = run_bench(SMALL)
    text = render_summary(SMALL, report.cells)
    for query in SMALL.queries:
        assert query in text
    for agent in SMALL.agents:
        assert agent in text
    assert "vs egg" in text


def test_trace_covers_each_node_limit():
    _, catalog = generate()
    rows = trace_egg("join3", catalog, node_limits=(100, 200))
    assert {r.node_limit for r in rows} == {100, 200}
    for limit in (100, 200):
        sub = [r for r in rows if r.node_limit == limit]
        # Application counter starts at the initial snapshot row.
        assert sub[0].application == 0
        assert sub[0].rule == "(initial)"
        costs = [r.cost for r in sub]
        assert costs == sorted(costs, reverse=True) or all(
            a >= b - 1e-9 for a, b in zip(costs, costs[1:]))
    text = render_trace_csv(rows)
    assert text.splitlines()[0].startswith("node_limit,")
