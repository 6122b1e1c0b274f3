"""Command-line front end: data generation, optimization, bench, serving.

Exit codes: 0 success, 1 usage error, 2 optimization error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from .agents import egg_loop, heuristic_policy, random_policy, run_episode
from .bench import (BenchSpec, render_trace_csv, run_bench, trace_egg)
from .bridge import serve_stdio, serve_tcp
from .catalog import Catalog
from .costs import tree_cost
from .datagen import QUERIES, QUERY_ORDER, SUITES, generate, load_dataset, write_dataset
from .emit import emit_sql
from .env import EnvConfig, RewriteEnv
from .errors import SqlsatError
from .extract import build_instance, greedy_extract, ilp_extract
from .interp import interpret
from .ir import bag_equal, pretty
from .parser import parse
from .rules import catalog as rules_catalog


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _build_parser() -> _Parser:
    p = _Parser(prog="sqlsat", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen-data", help="write the mini dataset + catalog")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--suite", default="mini", choices=SUITES)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)

    o = sub.add_parser("optimize", help="optimize one query and print the plan")
    src = o.add_mutually_exclusive_group(required=True)
    src.add_argument("--sql", help="SQL text, or a path to a file holding it")
    src.add_argument("--query", choices=QUERY_ORDER, help="named fixture")
    o.add_argument("--catalog", help="catalog.json path (default: generated mini)")
    o.add_argument("--data", help="dataset directory (for --verify)")
    o.add_argument("--agent", default="egg",
                   choices=("egg", "heuristic", "random"))
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--rollouts", type=int, default=20,
                   help="episodes for the random agent")
    o.add_argument("--node-limit", type=int, default=1000)
    o.add_argument("--horizon", type=int, default=40)
    o.add_argument("--patience", type=int, default=10)
    o.add_argument("--extractor", default="ilp", choices=("ilp", "greedy"))
    o.add_argument("--emit", default="sql", choices=("plan", "sql", "csv"))
    o.add_argument("--dump-egraph", metavar="PATH")
    o.add_argument("--dump-ilp", metavar="PATH")
    o.add_argument("--verify", action="store_true",
                   help="re-execute and compare with the input query")

    b = sub.add_parser("bench", help="run the mini benchmark suite")
    b.add_argument("--suite", default="mini", choices=SUITES)
    b.add_argument("--seeds", type=int, default=5, help="number of seeds")
    b.add_argument("--rollouts", type=int, default=100)
    b.add_argument("--horizon", type=int, default=40)
    b.add_argument("--node-limit", type=int, default=1000)
    b.add_argument("--patience", type=int, default=10)
    b.add_argument("--extractor", default="ilp", choices=("ilp", "greedy"))
    b.add_argument("--scale", type=float, default=1.0)
    b.add_argument("--data-seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--queries", help="comma-separated fixture names")
    b.add_argument("--agents", help="comma-separated agent names")
    b.add_argument("--out", metavar="CSV", help="write rows to this file")

    t = sub.add_parser("trace-egg", help="per-application egg trace CSV")
    t.add_argument("--query", default="join6", choices=QUERY_ORDER)
    t.add_argument("--node-limits", default="3500",
                   help="comma-separated caps")
    t.add_argument("--out", metavar="CSV")

    r = sub.add_parser("rules", help="rule catalog")
    r.add_argument("action", nargs="?", default="list", choices=("list",))

    s = sub.add_parser("serve", help="speak the bridge protocol")
    how = s.add_mutually_exclusive_group(required=True)
    how.add_argument("--stdio", action="store_true")
    how.add_argument("--port", type=int)
    s.add_argument("--catalog", help="catalog.json path (default: generated mini)")
    s.add_argument("--node-limit", type=int, default=1000)
    s.add_argument("--horizon", type=int, default=200)
    return p


def _load_catalog(path: str | None) -> Catalog:
    if path is None:
        return generate()[1]
    return Catalog.load(path)


def _cmd_gen_data(args) -> int:
    cat = write_dataset(args.out, args.scale, args.seed)
    total = sum(t.row_count for t in cat.tables)
    print(f"wrote {len(cat.tables)} tables ({total} rows) to {args.out}")
    return 0


def _cmd_optimize(args) -> int:
    if args.data:
        db, cat = load_dataset(args.data)
    else:
        db, cat = generate()
        if args.catalog:
            cat = Catalog.load(args.catalog)
            db = None
    schema = cat.schema()
    sql = QUERIES[args.query] if args.query else args.sql
    if args.sql and Path(args.sql).is_file():
        sql = Path(args.sql).read_text()
    expr = parse(sql, schema)
    baseline = tree_cost(expr, cat)

    cfg = EnvConfig(node_limit=args.node_limit, horizon=args.horizon)
    if args.agent == "egg":
        out = egg_loop(expr, cat, args.node_limit)
        g, root, steps = out.graph, out.root, out.applications
    else:
        env = RewriteEnv(expr, cat, cfg)
        if args.agent == "heuristic":
            res = run_episode(env, lambda e, o: heuristic_policy(e),
                              patience=args.patience)
        else:
            best_episode, best_cost = 0, float("inf")
            for episode in range(args.rollouts):
                rng = random.Random((args.seed << 20) + episode)
                r = run_episode(env, lambda e, o: random_policy(o, rng),
                                patience=args.patience)
                if r.cost < best_cost:
                    best_episode, best_cost = episode, r.cost
            # Replay the winning episode to leave its graph in env.
            rng = random.Random((args.seed << 20) + best_episode)
            res = run_episode(env, lambda e, o: random_policy(o, rng),
                              patience=args.patience)
        g, root, steps = env.g, env.root, res.steps

    if args.extractor == "greedy":
        ext = greedy_extract(g, root)
    else:
        ext = ilp_extract(g, root)
    if args.dump_egraph:
        Path(args.dump_egraph).write_text(g.serialize() + "\n")
    if args.dump_ilp:
        Path(args.dump_ilp).write_text(build_instance(g, g.find(root)).to_lp())

    if args.emit == "plan":
        print(pretty(ext.expr))
    elif args.emit == "sql":
        print(emit_sql(ext.expr, schema))
    else:
        opt = "" if ext.optimal is None else ("yes" if ext.optimal else "no")
        print("agent,steps,nodes,baseline_cost,cost,extractor,optimal")
        print(f"{args.agent},{steps},{g.node_count},{baseline:.9g},"
              f"{ext.total_cost:.9g},{args.extractor},{opt}")

    if args.verify:
        if db is None:
            print("verification needs --data (no rows for this catalog)",
                  file=sys.stderr)
            return 3
        if not bag_equal(interpret(expr, db, schema),
                         interpret(ext.expr, db, schema)):
            print("verification FAILED: plans disagree", file=sys.stderr)
            return 3
        print("verified: extracted plan matches the input query", file=sys.stderr)
    return 0


def _cmd_bench(args) -> int:
    kwargs = dict(
        suite=args.suite,
        seeds=tuple(range(args.seeds)),
        rollouts=args.rollouts,
        horizon=args.horizon,
        node_limit=args.node_limit,
        patience=args.patience,
        extractor=args.extractor,
        scale=args.scale,
        data_seed=args.data_seed,
        workers=args.workers,
    )
    if args.queries:
        kwargs["queries"] = tuple(args.queries.split(","))
    if args.agents:
        kwargs["agents"] = tuple(args.agents.split(","))
    out = run_bench(BenchSpec(**kwargs))
    if args.out:
        Path(args.out).write_text(out.csv_text)
    else:
        sys.stdout.write(out.csv_text)
    print(out.summary, end="")
    if any(c.note for c in out.cells):
        return 2
    if any(not c.verified for c in out.cells):
        return 3
    return 0


def _cmd_trace_egg(args) -> int:
    _, cat = generate()
    limits = tuple(int(x) for x in args.node_limits.split(","))
    rows = trace_egg(args.query, cat, limits)
    text = render_trace_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(rows)} trace rows to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_rules(args) -> int:
    for i, r in enumerate(rules_catalog()):
        print(f"{i:2d}  {r.category:<10} {r.name:<20} {r.note}")
    print(f"{len(rules_catalog()):2d}  control    reset                "
          f"extract best plan and restart from it")
    return 0


def _cmd_serve(args) -> int:
    cat = _load_catalog(args.catalog)
    cfg = EnvConfig(node_limit=args.node_limit, horizon=args.horizon)
    if args.stdio:
        serve_stdio(cat, cfg)
        return 0
    srv = serve_tcp(cat, args.port, cfg)
    print(f"serving on 127.0.0.1:{srv.server_address[1]}", file=sys.stderr)
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        srv.server_close()
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "optimize": _cmd_optimize,
    "bench": _cmd_bench,
    "trace-egg": _cmd_trace_egg,
    "rules": _cmd_rules,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.cmd](args)
    except SqlsatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
