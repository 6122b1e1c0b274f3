"""Rewriting environment: episodes, masks, simulate, observations."""

import random

import numpy as np
import pytest

from sqlsat.agents import heuristic_policy, run_episode
from sqlsat.datagen import QUERIES, generate
from sqlsat.egraph import apply_rule
from sqlsat.env import EnvConfig, RewriteEnv
from sqlsat.errors import EpisodeFinished, InvalidAction
from sqlsat.extract import greedy_extract
from sqlsat.parser import parse
from sqlsat.rules import RULE_COUNT

DB, CATALOG = generate()
SCHEMA = CATALOG.schema()


def make_env(query="nested_filters", **kw):
    cfg = EnvConfig(**{"node_limit": 400, "horizon": 25, **kw})
    return RewriteEnv(parse(QUERIES[query], SCHEMA), CATALOG, cfg)


def test_action_space_is_rules_plus_reset():
    env = make_env()
    assert env.num_actions == RULE_COUNT + 1
    assert RewriteEnv.RESET_ACTION == RULE_COUNT


def test_step_before_reset_is_an_error():
    env = make_env()
    with pytest.raises(EpisodeFinished):
        env.step(0)


def test_invalid_action_rejected():
    env = make_env()
    env.reset()
    with pytest.raises(InvalidAction):
        env.step(env.num_actions)
    with pytest.raises(InvalidAction):
        env.step(-1)


def test_episode_ends_at_horizon():
    env = make_env(horizon=5)
    env.reset()
    done = False
    for _ in range(5):
        result = env.step(RewriteEnv.RESET_ACTION)
        done = result.done
    assert done and env.finished
    with pytest.raises(EpisodeFinished):
        env.step(0)


def test_mask_marks_exactly_the_applicable_rules():
    rng = random.Random(3)
    env = make_env("join3")
    obs = env.reset()
    for _ in range(8):
        mask = obs.mask
        assert mask[RewriteEnv.RESET_ACTION]
        for action in range(RULE_COUNT):
            reward, info = env.simulate(action)
            if mask[action]:
                continue
            # A masked rule must not change the graph when applied.
            assert info["applied"] == 0 or info["saturated"], action
        legal = [i for i, ok in enumerate(mask) if ok]
        obs = env.step(rng.choice(legal)).obs


def test_simulate_equals_step_then_undo():
    env = make_env("join3")
    env.reset()
    for action in (0, 3, RewriteEnv.RESET_ACTION):
        before = env.g.serialize()
        want_reward, want_info = env.simulate(action)
        assert env.g.serialize() == before
        result = env.step(action)
        assert result.reward == pytest.approx(want_reward)
        assert result.info["cost"] == pytest.approx(want_info["cost"])


def test_reset_action_keeps_cost_and_shrinks_graph():
    env = make_env("join6", node_limit=2000, horizon=40)
    env.reset()
    rng = random.Random(5)
    obs = env.encode()
    for _ in range(10):
        legal = [i for i, ok in enumerate(obs.mask) if ok and i != RewriteEnv.RESET_ACTION]
        if not legal:
            break
        obs = env.step(rng.choice(legal)).obs
    cost_before = env.current_cost()
    plan_before = greedy_extract(env.g, env.root)
    env.step(RewriteEnv.RESET_ACTION)
    # The graph now holds exactly the extracted plan, at the same cost.
    assert env.current_cost() == cost_before
    again = greedy_extract(env.g, env.root)
    assert again.expr == plan_before.expr

    def count(e):
        return 1 + sum(count(c) for c in e.children)

    assert env.node_count() <= count(plan_before.expr)


def test_observation_shapes_and_dtypes():
    env = make_env()
    obs = env.reset()
    n_rows = obs.nodes.shape[0]
    assert obs.nodes.dtype == np.float32
    assert obs.nodes.shape[1] == env.config.feature_dim
    assert obs.edges.dtype == np.int64 and obs.edges.shape[0] == 2
    assert obs.edge_attrs.shape[0] == obs.edges.shape[1]
    assert set(np.unique(obs.edge_attrs)) <= {0, 1}
    assert obs.mask.dtype == bool and obs.mask.shape == (env.num_actions,)
    assert obs.context.shape == (2,)
    assert (obs.edges < n_rows).all() and (obs.edges >= 0).all()


def test_observation_rows_cover_classes_and_nodes():
    env = make_env()
    obs = env.reset()
    g = env.g
    want = len(g.class_ids()) + sum(len(g.nodes_of(c)) for c in g.class_ids())
    assert obs.nodes.shape[0] == want
    # One marker flag per row: class rows set column 0, node rows column 1.
    assert int(obs.nodes[:, 0].sum() + obs.nodes[:, 1].sum()) == want


def test_budget_blocked_rule_rolls_back():
    # Grow until some rule would burst the budget, then check rollback.
    env = make_env("join6", node_limit=90, horizon=60)
    obs = env.reset()
    rng = random.Random(1)
    hit = None
    for _ in range(60):
        for action in range(RULE_COUNT):
            _, info = env.simulate(action)
            if info["rolled_back"]:
                hit = action
                break
        if hit is not None:
            break
        legal = [i for i, ok in enumerate(obs.mask)
                 if ok and i != RewriteEnv.RESET_ACTION]
        if not legal:
            break
        obs = env.step(rng.choice(legal)).obs
    assert hit is not None, "no rule tripped the budget at this limit"
    before = env.g.serialize()
    result = env.step(hit)
    assert result.info["rolled_back"]
    assert env.g.serialize() == before
    assert result.reward < 0


def test_run_episode_with_heuristic_improves_nested_filters():
    env = make_env("nested_filters", node_limit=500, horizon=15)
    start = None
    out = run_episode(env, lambda e, obs: heuristic_policy(e), patience=5)
    base_env = make_env("nested_filters")
    base_env.reset()
    start = base_env.current_cost()
    assert out.cost < start
