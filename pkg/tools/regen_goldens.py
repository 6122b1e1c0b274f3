#!/usr/bin/env python3
"""Regenerate the golden files under tests/data/.

Run from the repository root after an intentional behavior change:

    python3 tools/regen_goldens.py

Review the diff before committing; goldens exist to make accidental
behavior drift loud, so a regenerated file should always correspond to
a change you can explain.
"""

import json
import random
from pathlib import Path

from sqlsat.bench import BenchSpec, render_csv, run_bench
from sqlsat.bridge import BridgeServer
from sqlsat.datagen import generate
from sqlsat.env import EnvConfig

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

TRANSCRIPT_STEPS = 50
TRANSCRIPT_SEED = 3


def bridge_transcript() -> str:
    """A scripted session: hello, rules, reset, 50 steps, close.

    Both request and response lines are recorded; actions are chosen
    from the advertised mask with a fixed rng so the whole exchange is
    reproducible byte for byte.
    """
    _, catalog = generate()
    srv = BridgeServer(catalog, EnvConfig(node_limit=500, horizon=200))
    rng = random.Random(TRANSCRIPT_SEED)
    lines: list[str] = []

    def call(**fields):
        request = json.dumps(fields, sort_keys=True, separators=(",", ":"))
        reply = srv.handle_line(request)
        lines.append("> " + request)
        lines.append("< " + reply)
        return json.loads(reply)

    call(seq=1, op="hello")
    call(seq=2, op="rules")
    doc = call(seq=3, op="reset", query_id="join6", seed=TRANSCRIPT_SEED)
    mask = doc["mask"]
    for i in range(TRANSCRIPT_STEPS):
        legal = [a for a, ok in enumerate(mask) if ok]
        doc = call(seq=4 + i, op="step", action=rng.choice(legal))
        mask = doc["observation"]["mask"]
    call(seq=4 + TRANSCRIPT_STEPS, op="close")
    return "\n".join(lines) + "\n"


def bench_small_csv() -> str:
    """A fast bench slice used to pin the CSV schema and determinism."""
    spec = BenchSpec(queries=("nested_filters", "join3"),
                     agents=("egg", "random"), seeds=(0, 1), rollouts=3,
                     horizon=15, node_limit=300, patience=5, ilp_pops=2000)
    report = run_bench(spec)
    return render_csv(report.cells)


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "bridge_transcript.txt").write_text(bridge_transcript())
    (DATA / "bench_small.csv").write_text(bench_small_csv())
    for name in ("bridge_transcript.txt", "bench_small.csv"):
        print(f"wrote tests/data/{name}")


if __name__ == "__main__":
    main()
