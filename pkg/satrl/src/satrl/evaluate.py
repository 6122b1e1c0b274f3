"""Evaluation rollouts producing rows in the optimizer's bench format.

Soundness of the plans behind these costs is the environment's own
guarantee (every e-graph state is reachable by equivalence-preserving
rewrites, and the optimizer's benchmarks verify extracted plans against
the interpreter); this side of the protocol has no interpreter, so the
`verified` column is left empty rather than claimed.
"""

import statistics
from pathlib import Path

import torch

from .model import PolicyNet, batch_observations
from .protocol import BridgeClient
from .train import load_checkpoint

# Named queries of the optimizer's published mini suite.
MINI_SUITE = ("nested_filters", "pg_original", "pg_optimal",
              "pg_alternative", "join3", "join6")

# Bench CSV layout, schema version 1, as emitted by `sqlsat bench`.
CSV_COLUMNS = ("schema_version", "query", "agent", "seed", "rollouts",
               "baseline_cost", "best_cost", "median_cost", "worst_cost",
               "mean_steps", "best_final_nodes", "verified", "note")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def sampled_episode(client: BridgeClient, model: PolicyNet, query: str,
                    gen: torch.Generator) -> tuple[list[int], list[float], int]:
    """One stochastic rollout; returns (actions, costs, final node count)."""
    actions: list[int] = []
    costs: list[float] = []
    nodes = 0
    with torch.no_grad():
        obs = client.reset(query)
        state = model.initial_state(1)
        while True:
            gb = batch_observations([obs])
            logits, _, state = model(gb, state)
            act = int(torch.multinomial(torch.softmax(logits, dim=-1), 1,
                                        generator=gen)[0])
            rep = client.step(act)
            actions.append(act)
            costs.append(float(rep.info["cost"]))
            nodes = int(rep.info["nodes"])
            obs = rep.obs
            if rep.done:
                return actions, costs, nodes


def baseline_cost(client: BridgeClient, query: str) -> float:
    """Cost of the unrewritten plan: extract immediately via the reset
    action on a throwaway episode."""
    client.reset(query)
    return float(client.step(client.reset_action).info["cost"])


def evaluate(ckpt: str | Path, suite: str = "mini",
             seeds: tuple[int, ...] = (0, 1, 2, 3, 4), rollouts: int = 5,
             catalog: str | None = None) -> list[dict]:
    if suite != "mini":
        raise ValueError(f"unknown suite {suite!r}")
    model, cfg, _ = load_checkpoint(ckpt)
    rows: list[dict] = []
    with BridgeClient(node_limit=cfg.node_limit, horizon=cfg.horizon,
                      catalog=catalog if catalog is not None else cfg.catalog,
                      ) as client:
        for query in MINI_SUITE:
            base = baseline_cost(client, query)
            for seed in seeds:
                gen = torch.Generator().manual_seed(seed)
                finals: list[float] = []
                lengths: list[int] = []
                best_nodes = 0
                for _ in range(rollouts):
                    _, costs, nodes = sampled_episode(client, model, query, gen)
                    finals.append(costs[-1])
                    lengths.append(len(costs))
                    if costs[-1] <= min(finals):
                        best_nodes = nodes
                rows.append({
                    "schema_version": 1,
                    "query": query,
                    "agent": "rl",
                    "seed": seed,
                    "rollouts": rollouts,
                    "baseline_cost": base,
                    "best_cost": min(finals),
                    "median_cost": statistics.median(finals),
                    "worst_cost": max(finals),
                    "mean_steps": sum(lengths) / len(lengths),
                    "best_final_nodes": best_nodes,
                    "verified": "",
                    "note": "",
                })
    return rows


def render_csv(rows: list[dict]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"
