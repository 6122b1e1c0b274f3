"""Baseline action-selection strategies over the rewriting environment.

`random_policy` samples uniformly from the legal actions.
`heuristic_policy` simulates every legal action and takes the best
one-step reward, breaking ties toward the lowest action index.
`egg_loop` is the non-guided reference: full catalog sweeps until the
graph saturates or the node budget blocks every remaining rule.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .catalog import Catalog
from .costs import CostAnalysis
from .egraph import EGraph, apply_rule
from .env import Observation, RewriteEnv
from .errors import NodeBudgetExceeded
from .extract import ExtractResult, greedy_extract
from .ir import RaExpr

# Which agents produce identical episodes on every run.
DETERMINISTIC_AGENTS = {"egg": True, "heuristic": True, "random": False}


def random_policy(obs: Observation, rng: random.Random) -> int:
    legal = [i for i, ok in enumerate(obs.mask) if ok]
    return rng.choice(legal)


def heuristic_policy(env: RewriteEnv) -> int:
    best_action = RewriteEnv.RESET_ACTION
    best_reward = float("-inf")
    mask = env.action_mask()
    for action, ok in enumerate(mask):
        if not ok:
            continue
        reward, _ = env.simulate(action)
        if reward > best_reward:
            best_action, best_reward = action, reward
    return best_action


@dataclass
class EpisodeResult:
    cost: float
    plan: RaExpr
    steps: int
    improved_at: list[int] = field(default_factory=list)


def run_episode(env: RewriteEnv, select, patience: int | None = None,
                max_steps: int | None = None) -> EpisodeResult:
    """Run one episode; `select(env, obs) -> action`.

    With `patience` set, the episode ends early after that many
    consecutive steps without a cost improvement; the best plan so far
    is unaffected because rewriting never loses it.
    """
    obs = env.reset()
    best = env.current_cost()
    stale = 0
    improved: list[int] = []
    steps = 0
    limit = max_steps if max_steps is not None else env.config.horizon
    while not env.finished and steps < limit:
        action = select(env, obs)
        result = env.step(action)
        obs = result.obs
        steps += 1
        cost = env.current_cost()
        if cost < best - 1e-12:
            best = cost
            stale = 0
            improved.append(steps)
        else:
            stale += 1
            if patience is not None and stale >= patience:
                break
    extracted = greedy_extract(env.g, env.root)
    return EpisodeResult(extracted.total_cost, extracted.expr, steps, improved)


@dataclass
class EggStep:
    application: int
    rule_index: int
    rule: str
    nodes: int
    cost: float
    saturated: bool


@dataclass
class EggResult:
    trace: list[EggStep]
    extract: ExtractResult
    applications: int
    saturated: bool
    budget_hit: bool
    final_nodes: int
    graph: EGraph
    root: int


def egg_loop(expr: RaExpr, catalog: Catalog, node_limit: int,
             rules=None, max_sweeps: int = 100) -> EggResult:
    """Unguided equality saturation: sweep the whole catalog repeatedly.

    A rule whose application would burst the node budget is skipped (the
    graph rolls back); the loop ends when a full sweep changes nothing
    or every rule that could change something is blocked by the budget.
    """
    from .rules import catalog as rules_catalog

    rules = tuple(rules) if rules is not None else rules_catalog()
    g = EGraph(analysis=CostAnalysis(catalog), node_limit=node_limit)
    root = g.add_expr(expr)
    g.rebuild()

    def cost() -> float:
        return g.data(g.find(root)).best_cost

    trace = [EggStep(0, -1, "(initial)", g.node_count, cost(), False)]
    applications = 0
    budget_hit = False
    saturated = False
    for _ in range(max_sweeps):
        changed = False
        for i, rule in enumerate(rules):
            try:
                report = apply_rule(g, rule)
            except NodeBudgetExceeded:
                budget_hit = True
                continue
            applications += 1
            trace.append(EggStep(applications, i, rule.name, g.node_count,
                                 cost(), report.saturated))
            if not report.saturated:
                changed = True
        if not changed:
            saturated = not budget_hit
            break
    return EggResult(trace, greedy_extract(g, g.find(root)), applications,
                     saturated, budget_hit, g.node_count, g, g.find(root))
