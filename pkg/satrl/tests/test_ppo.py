"""Advantage estimation and the update step."""

import numpy as np
import pytest
import torch

from satrl.model import PolicyNet
from satrl.ppo import Episode, gae, ppo_update
from conftest import make_obs


def test_gae_matches_hand_computed_values():
    # gamma=0.5, lambda=0.5, worked backwards by hand:
    #   t2: delta = 2 + 0 - 0.3 = 1.7
    #   t1: delta = -0.25, acc = -0.25 + 0.25*1.7 = 0.175
    #   t0: delta = 0.7,  acc = 0.7 + 0.25*0.175 = 0.74375
    adv, ret = gae(np.array([1.0, 0.0, 2.0]), np.array([0.5, 0.4, 0.3]),
                   discount=0.5, lam=0.5)
    assert np.allclose(adv, [0.74375, 0.175, 1.7])
    assert np.allclose(ret, [1.24375, 0.575, 2.0])


def test_gae_reduces_to_rewards_minus_values_at_gamma_zero():
    r = np.array([3.0, 1.0, 4.0])
    v = np.array([1.0, 1.0, 1.0])
    adv, ret = gae(r, v, discount=0.0, lam=0.9)
    assert np.allclose(adv, r - v)
    assert np.allclose(ret, r)


def _episodes(n: int, T: int, model: PolicyNet,
              seed: int = 0) -> list[Episode]:
    rng = np.random.default_rng(seed)
    eps = []
    for i in range(n):
        ep = Episode()
        for t in range(T):
            o = make_obs(3 + (t + i) % 3, seed=seed * 97 + i * 31 + t)
            legal = np.flatnonzero(o.mask)
            ep.obs.append(o)
            ep.actions.append(int(rng.choice(legal)))
            ep.logps.append(float(np.log(1.0 / len(legal))))
            ep.values.append(float(rng.normal()))
            ep.rewards.append(float(rng.normal()))
            ep.costs.append(100.0 - t)
        eps.append(ep)
    return eps


def test_update_changes_parameters_and_keeps_them_finite():
    torch.manual_seed(0)
    model = PolicyNet(6, 5, width=8, heads=2)
    opt = torch.optim.Adam(model.parameters(), lr=1e-3)
    before = [p.detach().clone() for p in model.parameters()]
    stats = ppo_update(model, opt, _episodes(4, 5, model),
                       clip_ratio=0.2, discount=0.99, gae_lambda=0.95,
                       epochs=2, minibatch_episodes=2, value_coef=0.5,
                       entropy_coef=0.01, max_grad_norm=0.5,
                       rng=np.random.default_rng(1))
    after = list(model.parameters())
    assert any((a != b).any() for a, b in zip(after, before))
    assert all(torch.isfinite(p).all() for p in after)
    assert np.isfinite([stats.policy_loss, stats.value_loss,
                        stats.entropy, stats.clip_fraction]).all()


def test_mixed_length_episodes_are_rejected():
    torch.manual_seed(0)
    model = PolicyNet(6, 5, width=8, heads=2)
    opt = torch.optim.Adam(model.parameters(), lr=1e-3)
    eps = _episodes(1, 4, model) + _episodes(1, 6, model)
    with pytest.raises(ValueError):
        ppo_update(model, opt, eps, clip_ratio=0.2, discount=0.99,
                   gae_lambda=0.95, epochs=1, minibatch_episodes=2,
                   value_coef=0.5, entropy_coef=0.01, max_grad_norm=0.5,
                   rng=np.random.default_rng(1))
