"""Clipped policy-gradient update over full-episode sequences."""

from dataclasses import dataclass, field

import numpy as np
import torch

from .model import PolicyNet, batch_observations, masked_entropy
from .protocol import Observation


@dataclass
class Episode:
    """One horizon-length trajectory from a single environment."""

    obs: list[Observation] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    logps: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)


def gae(rewards: np.ndarray, values: np.ndarray, discount: float,
        lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and returns; episodes end at the horizon, so the
    bootstrap value past the final step is zero."""
    T = len(rewards)
    adv = np.zeros(T)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        nxt = values[t + 1] if t + 1 < T else 0.0
        delta = rewards[t] + discount * nxt - values[t]
        acc = delta + discount * lam * acc
        adv[t] = acc
    return adv, adv + values


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float


class TrainingDiverged(RuntimeError):
    """A parameter went non-finite after an optimizer step."""


def _replay(model: PolicyNet, episodes: list[Episode]):
    """Recompute log-probs, values, entropies for a same-length batch of
    episodes by unrolling from a zero state, mirroring collection."""
    T = len(episodes[0])
    state = model.initial_state(len(episodes))
    logps, values, entropies = [], [], []
    for t in range(T):
        gb = batch_observations([ep.obs[t] for ep in episodes])
        logits, value, state = model(gb, state)
        acts = torch.tensor([ep.actions[t] for ep in episodes])
        logp = torch.log_softmax(logits, dim=-1).gather(
            1, acts.unsqueeze(1)).squeeze(1)
        logps.append(logp)
        values.append(value)
        entropies.append(masked_entropy(logits))
    return (torch.stack(logps, dim=1), torch.stack(values, dim=1),
            torch.stack(entropies, dim=1))


def ppo_update(model: PolicyNet, optimizer: torch.optim.Optimizer,
               episodes: list[Episode], *, clip_ratio: float, discount: float,
               gae_lambda: float, epochs: int, minibatch_episodes: int,
               value_coef: float, entropy_coef: float, max_grad_norm: float,
               rng: np.random.Generator, reward_scale: float = 1.0) -> UpdateStats:
    lengths = {len(ep) for ep in episodes}
    if len(lengths) != 1:
        raise ValueError(f"episodes have mixed lengths {sorted(lengths)}")
    advs, rets = [], []
    for ep in episodes:
        # Raw rewards are ~0.1 in magnitude; scaling them up gives the critic
        # usefully sized targets without changing the optimal policy.
        a, r = gae(np.asarray(ep.rewards) * reward_scale, np.asarray(ep.values),
                   discount, gae_lambda)
        advs.append(a)
        rets.append(r)
    adv = np.stack(advs)
    ret = np.stack(rets)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    stats = []
    for _ in range(epochs):
        order = rng.permutation(len(episodes))
        for lo in range(0, len(order), minibatch_episodes):
            idx = order[lo:lo + minibatch_episodes]
            batch = [episodes[i] for i in idx]
            logp, value, entropy = _replay(model, batch)
            old = torch.tensor(np.stack([batch[j].logps for j in range(len(batch))]),
                               dtype=logp.dtype)
            b_adv = torch.tensor(adv[idx], dtype=logp.dtype)
            b_ret = torch.tensor(ret[idx], dtype=logp.dtype)
            ratio = (logp - old).exp()
            clipped = ratio.clamp(1.0 - clip_ratio, 1.0 + clip_ratio)
            policy_loss = -torch.min(ratio * b_adv, clipped * b_adv).mean()
            value_loss = (value - b_ret).pow(2).mean()
            ent = entropy.mean()
            loss = policy_loss + value_coef * value_loss - entropy_coef * ent
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), max_grad_norm)
            optimizer.step()
            stats.append((policy_loss.item(), value_loss.item(), ent.item(),
                          (ratio.detach() - 1).abs().gt(clip_ratio).float()
                          .mean().item()))
    for name, p in model.named_parameters():
        if not torch.isfinite(p).all():
            raise TrainingDiverged(f"parameter {name} went non-finite")
    mean = [float(np.mean([s[i] for s in stats])) for i in range(4)]
    return UpdateStats(*mean)
