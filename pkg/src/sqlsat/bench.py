"""Benchmark harness: agents x queries x seeds, with equivalence checks.

Deterministic agents (egg, heuristic) produce one row with seed -1;
stochastic agents produce one row per seed aggregating `episodes`
rollouts.  Every distinct extracted plan is re-executed against the
generated data and bag-compared with the original query's result.  The
CSV holds only run-to-run stable fields so regenerated files are
byte-identical; wall times go to the summary instead.
"""

from __future__ import annotations

import csv
import io
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .agents import (DETERMINISTIC_AGENTS, egg_loop, heuristic_policy,
                     random_policy, run_episode)
from .catalog import Catalog
from .costs import tree_cost
from .datagen import QUERIES, QUERY_ORDER, generate
from .env import EnvConfig, RewriteEnv
from .extract import greedy_extract, ilp_extract
from .interp import interpret
from .ir import RaExpr, Relation, bag_equal
from .parser import parse

CSV_VERSION = 1
CSV_COLUMNS = ("schema_version", "query", "agent", "seed", "rollouts",
               "baseline_cost", "best_cost", "median_cost", "worst_cost",
               "mean_steps", "best_final_nodes", "verified", "note")


@dataclass(frozen=True)
class BenchSpec:
    suite: str = "mini"
    queries: tuple[str, ...] = QUERY_ORDER
    agents: tuple[str, ...] = ("egg", "heuristic", "random")
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    rollouts: int = 100
    horizon: int = 40
    node_limit: int = 1000
    patience: int | None = 10
    max_sweeps: int = 100
    extractor: str = "ilp"
    ilp_pops: int = 20000  # deterministic search cap, not wall time
    scale: float = 1.0
    data_seed: int = 0
    workers: int = 1
    verify: bool = True


@dataclass
class CellResult:
    query: str
    agent: str
    seed: int
    rollouts: int
    baseline_cost: float
    best_cost: float
    median_cost: float
    worst_cost: float
    mean_steps: float
    best_final_nodes: int
    verified: bool
    planning_ms: float
    exec_ms: float
    distinct_plans: int
    note: str = ""


@dataclass
class BenchResult:
    spec: BenchSpec
    cells: list[CellResult]
    csv_text: str
    summary: str


# Populated in the parent before any pool fork so workers inherit it.
_CTX: dict = {}


def _context(spec: BenchSpec) -> dict:
    key = (spec.scale, spec.data_seed)
    if _CTX.get("key") != key:
        db, cat = generate(spec.scale, spec.data_seed)
        schema = cat.schema()
        _CTX.clear()
        _CTX.update(key=key, db=db, catalog=cat, schema=schema,
                    exprs={}, baselines={}, plan_results={})
    return _CTX


def _expr(ctx: dict, query: str) -> RaExpr:
    if query not in ctx["exprs"]:
        ctx["exprs"][query] = parse(QUERIES[query], ctx["schema"])
    return ctx["exprs"][query]


def _baseline(ctx: dict, query: str) -> Relation:
    if query not in ctx["baselines"]:
        expr = _expr(ctx, query)
        ctx["baselines"][query] = interpret(expr, ctx["db"], ctx["schema"])
    return ctx["baselines"][query]


def _plan_matches(ctx: dict, query: str, plan: RaExpr) -> bool:
    cache = ctx["plan_results"]
    key = (query, plan)
    if key not in cache:
        got = interpret(plan, ctx["db"], ctx["schema"])
        cache[key] = bag_equal(got, _baseline(ctx, query))
    return cache[key]


def _extract_final(spec: BenchSpec, g, root):
    if spec.extractor == "greedy":
        return greedy_extract(g, root)
    return ilp_extract(g, root, max_pops=spec.ilp_pops)


def _run_cell(spec: BenchSpec, query: str, agent: str, seed: int) -> CellResult:
    ctx = _context(spec)
    expr = _expr(ctx, query)
    cat: Catalog = ctx["catalog"]
    baseline = tree_cost(expr, cat)
    t0 = time.perf_counter()
    plans: list[RaExpr] = []
    best_plan = expr
    if agent == "egg":
        out = egg_loop(expr, cat, spec.node_limit, max_sweeps=spec.max_sweeps)
        ext = _extract_final(spec, out.graph, out.root)
        costs = [ext.total_cost]
        steps = [float(out.applications)]
        nodes = out.final_nodes
        best_plan = ext.expr
        plans.append(best_plan)
    elif agent == "heuristic":
        env = RewriteEnv(expr, cat, EnvConfig(node_limit=spec.node_limit,
                                              horizon=spec.horizon))
        res = run_episode(env, lambda e, o: heuristic_policy(e),
                          patience=spec.patience)
        ext = _extract_final(spec, env.g, env.root)
        costs = [ext.total_cost]
        steps = [float(res.steps)]
        nodes = env.g.node_count
        best_plan = ext.expr
        plans.append(best_plan)
    elif agent == "random":
        env = RewriteEnv(expr, cat, EnvConfig(node_limit=spec.node_limit,
                                              horizon=spec.horizon))
        costs, steps = [], []
        nodes = 0
        best = float("inf")
        for episode in range(spec.rollouts):
            rng = random.Random((seed << 20) + episode)
            res = run_episode(env, lambda e, o: random_policy(o, rng),
                              patience=spec.patience)
            ext = _extract_final(spec, env.g, env.root)
            costs.append(ext.total_cost)
            steps.append(float(res.steps))
            plans.append(ext.expr)
            if ext.total_cost < best:
                best, nodes, best_plan = ext.total_cost, env.g.node_count, ext.expr
    else:
        raise ValueError(f"unknown agent {agent!r}")
    planning_ms = (time.perf_counter() - t0) * 1000.0
    distinct = []
    for p in plans:
        if p not in distinct:
            distinct.append(p)
    verified = True
    if spec.verify:
        verified = all(_plan_matches(ctx, query, p) for p in distinct)
    t1 = time.perf_counter()
    interpret(best_plan, ctx["db"], ctx["schema"])
    exec_ms = (time.perf_counter() - t1) * 1000.0
    return CellResult(query, agent, seed, len(costs), baseline,
                      min(costs), statistics.median(costs), max(costs),
                      sum(steps) / len(steps), nodes, verified, planning_ms,
                      exec_ms, len(distinct))


def _cell_args(spec: BenchSpec) -> list[tuple[str, str, int]]:
    cells = []
    for query in spec.queries:
        for agent in spec.agents:
            if DETERMINISTIC_AGENTS.get(agent, False):
                cells.append((query, agent, -1))
            else:
                cells.extend((query, agent, s) for s in spec.seeds)
    return cells


def _safe_cell(spec: BenchSpec, query: str, agent: str, seed: int) -> CellResult:
    try:
        return _run_cell(spec, query, agent, seed)
    except Exception as exc:  # a broken cell must not sink the whole run
        return CellResult(query, agent, seed, 0, 0.0, 0.0, 0.0, 0.0, 0.0, 0,
                          False, 0.0, 0.0, 0,
                          note=f"{type(exc).__name__}: {exc}")


def _pool_cell(args) -> CellResult:
    spec, query, agent, seed = args
    return _safe_cell(spec, query, agent, seed)


def run_bench(spec: BenchSpec, outdir: str | Path | None = None) -> BenchResult:
    _context(spec)
    if spec.verify:
        for query in spec.queries:
            _baseline(_CTX, query)
    cells_args = _cell_args(spec)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            cells = list(pool.map(_pool_cell,
                                  [(spec, q, a, s) for q, a, s in cells_args]))
    else:
        cells = [_safe_cell(spec, q, a, s) for q, a, s in cells_args]
    csv_text = render_csv(cells)
    summary = render_summary(spec, cells)
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "bench.csv").write_text(csv_text)
        (outdir / "summary.txt").write_text(summary)
    return BenchResult(spec, cells, csv_text, summary)


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def render_csv(cells: list[CellResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    order = {q: i for i, q in enumerate(QUERY_ORDER)}
    for c in sorted(cells, key=lambda c: (order.get(c.query, 99), c.agent, c.seed)):
        w.writerow([CSV_VERSION, c.query, c.agent, c.seed, c.rollouts,
                    _fmt(c.baseline_cost), _fmt(c.best_cost),
                    _fmt(c.median_cost), _fmt(c.worst_cost),
                    _fmt(c.mean_steps), c.best_final_nodes,
                    "yes" if c.verified else "no", c.note])
    return buf.getvalue()


def render_summary(spec: BenchSpec, cells: list[CellResult]) -> str:
    lines = [
        f"bench[{spec.suite}]: {len(cells)} cells, node_limit={spec.node_limit} "
        f"horizon={spec.horizon} rollouts={spec.rollouts} "
        f"seeds={list(spec.seeds)} scale={spec.scale}",
    ]
    for query in spec.queries:
        rows = [c for c in cells if c.query == query]
        if not rows:
            continue
        lines.append(f"{query}: baseline {_fmt(rows[0].baseline_cost)}")
        egg_rows = [c for c in rows if c.agent == "egg" and not c.note]
        egg_cost = egg_rows[0].best_cost if egg_rows else None
        for agent in spec.agents:
            arows = [c for c in rows if c.agent == agent]
            if not arows:
                continue
            errors = [c for c in arows if c.note]
            good = [c for c in arows if not c.note]
            if not good:
                lines.append(f"  {agent:<9} all cells failed: {errors[0].note}")
                continue
            med = statistics.median(c.median_cost for c in good)
            best = min(c.best_cost for c in good)
            ms = sum(c.planning_ms for c in arows)
            rel = ""
            if egg_cost and agent != "egg":
                # Improvement over the egg baseline, floored at -100%.
                pct = max(-100.0, (egg_cost - med) / egg_cost * 100.0)
                rel = f"  vs egg {pct:+7.1f}%"
            bad = sum(1 for c in good if not c.verified)
            note = "" if bad == 0 else f"  UNVERIFIED x{bad}"
            if errors:
                note += f"  FAILED x{len(errors)}"
            lines.append(f"  {agent:<9} best {_fmt(best):>12}  median "
                         f"{_fmt(med):>12}  {ms:8.0f} ms{rel}{note}")
    return "\n".join(lines) + "\n"


@dataclass
class TraceRow:
    node_limit: int
    application: int
    rule_index: int
    rule: str
    nodes: int
    cost: float


def trace_egg(query: str, catalog: Catalog, node_limits: tuple[int, ...],
              max_sweeps: int = 100) -> list[TraceRow]:
    """Egg traces of one query at several node budgets, concatenated."""
    schema = catalog.schema()
    expr = parse(QUERIES[query], schema)
    rows = []
    for limit in node_limits:
        out = egg_loop(expr, catalog, limit, max_sweeps=max_sweeps)
        rows.extend(TraceRow(limit, s.application, s.rule_index, s.rule,
                             s.nodes, s.cost) for s in out.trace)
    return rows


def render_trace_csv(rows: list[TraceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("node_limit", "application", "rule_index", "rule",
                "nodes", "cost"))
    for r in rows:
        w.writerow([r.node_limit, r.application, r.rule_index, r.rule,
                    r.nodes, _fmt(r.cost)])
    return buf.getvalue()
