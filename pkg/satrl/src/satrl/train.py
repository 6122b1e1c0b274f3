"""Training loop: collect episodes over the bridge, update, checkpoint."""

import csv
import dataclasses
import json
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .model import PolicyNet, batch_observations
from .ppo import Episode, ppo_update
from .protocol import VectorBridge


@dataclass(frozen=True)
class TrainConfig:
    query: str = "nested_filters"
    total_steps: int = 20000
    horizon: int = 200
    node_limit: int = 1000
    num_envs: int = 8
    episodes_per_env: int = 1   # per update batch
    width: int = 128            # width/heads are undocumented upstream;
    heads: int = 4              # these defaults are stated guesses
    clip_ratio: float = 0.2
    discount: float = 0.99
    gae_lambda: float = 0.95
    lr: float = 3e-4
    epochs: int = 4
    minibatch_episodes: int = 8
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    entropy_anneal: bool = False   # linear decay of entropy_coef to 0
    max_grad_norm: float = 0.5
    reward_scale: float = 1.0
    seed: int = 0
    catalog: str | None = None

    @staticmethod
    def from_json(path: str | Path) -> "TrainConfig":
        raw = json.loads(Path(path).read_text())
        known = {f.name for f in dataclasses.fields(TrainConfig)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return TrainConfig(**raw)


CURVE_COLUMNS = ("step", "mean_return", "mean_best_cost")


def save_checkpoint(path: str | Path, model: PolicyNet, cfg: TrainConfig,
                    steps: int) -> None:
    """Write-temp-rename so a crash never leaves a torn checkpoint."""
    path = Path(path)
    payload = {
        "model": model.state_dict(),
        "config": dataclasses.asdict(cfg),
        "feature_dim": model.feature_dim,
        "num_actions": model.num_actions,
        "steps": steps,
    }
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            torch.save(payload, f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | Path) -> tuple[PolicyNet, TrainConfig, int]:
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    cfg = TrainConfig(**payload["config"])
    model = PolicyNet(payload["feature_dim"], payload["num_actions"],
                      width=cfg.width, heads=cfg.heads)
    model.load_state_dict(payload["model"])
    model.eval()
    return model, cfg, payload["steps"]


def collect_batch(vec: VectorBridge, model: PolicyNet, cfg: TrainConfig,
                  gen: torch.Generator) -> list[Episode]:
    """Lockstep rollouts: one action batch per timestep across all envs."""
    episodes: list[Episode] = []
    with torch.no_grad():
        for _ in range(cfg.episodes_per_env):
            eps = [Episode() for _ in range(len(vec))]
            obs = vec.reset_all(cfg.query, seed=cfg.seed)
            state = model.initial_state(len(vec))
            done = False
            while not done:
                gb = batch_observations(obs)
                logits, value, state = model(gb, state)
                probs = torch.softmax(logits, dim=-1)
                acts = torch.multinomial(probs, 1, generator=gen).squeeze(1)
                logp = torch.log_softmax(logits, dim=-1).gather(
                    1, acts.unsqueeze(1)).squeeze(1)
                replies = vec.step_all(acts.tolist())
                for i, rep in enumerate(replies):
                    eps[i].obs.append(obs[i])
                    eps[i].actions.append(int(acts[i]))
                    eps[i].logps.append(float(logp[i]))
                    eps[i].values.append(float(value[i]))
                    eps[i].rewards.append(rep.reward)
                    eps[i].costs.append(float(rep.info["cost"]))
                obs = [rep.obs for rep in replies]
                done = replies[0].done
            episodes.extend(eps)
    return episodes


def greedy_rollout(vec_or_client, model: PolicyNet, query: str) -> Episode:
    """Deterministic evaluation episode: always the argmax action."""
    client = vec_or_client
    ep = Episode()
    with torch.no_grad():
        obs = client.reset(query)
        state = model.initial_state(1)
        while True:
            gb = batch_observations([obs])
            logits, value, state = model(gb, state)
            act = int(logits.argmax(dim=-1))
            rep = client.step(act)
            ep.obs.append(obs)
            ep.actions.append(act)
            ep.values.append(float(value[0]))
            ep.rewards.append(rep.reward)
            ep.costs.append(float(rep.info["cost"]))
            obs = rep.obs
            if rep.done:
                return ep


@dataclass
class TrainResult:
    checkpoint: Path
    curve: Path
    steps: int
    final_cost: float  # deterministic rollout after the last update


def train(cfg: TrainConfig, out_dir: str | Path,
          log=lambda msg: None) -> TrainResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed + 1)
    rng = np.random.default_rng(cfg.seed + 2)
    ckpt = out / "policy.pt"
    curve_path = out / "curve.csv"
    t0 = time.monotonic()
    with VectorBridge(cfg.num_envs, node_limit=cfg.node_limit,
                      horizon=cfg.horizon, catalog=cfg.catalog) as vec:
        model = PolicyNet(vec.feature_dim, vec.num_actions,
                          width=cfg.width, heads=cfg.heads)
        optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
        steps = 0
        rows = []
        while steps < cfg.total_steps:
            episodes = collect_batch(vec, model, cfg, gen)
            steps += sum(len(ep) for ep in episodes)
            ent_coef = cfg.entropy_coef
            if cfg.entropy_anneal:
                ent_coef *= max(0.0, 1.0 - steps / cfg.total_steps)
            stats = ppo_update(
                model, optimizer, episodes, clip_ratio=cfg.clip_ratio,
                discount=cfg.discount, gae_lambda=cfg.gae_lambda,
                epochs=cfg.epochs, minibatch_episodes=cfg.minibatch_episodes,
                value_coef=cfg.value_coef, entropy_coef=ent_coef,
                max_grad_norm=cfg.max_grad_norm, rng=rng,
                reward_scale=cfg.reward_scale)
            mean_return = float(np.mean([sum(ep.rewards) for ep in episodes]))
            mean_best = float(np.mean([min(ep.costs) for ep in episodes]))
            rows.append((steps, mean_return, mean_best))
            log(f"step {steps}/{cfg.total_steps} return {mean_return:.4f} "
                f"best-cost {mean_best:.4f} entropy {stats.entropy:.3f} "
                f"({time.monotonic() - t0:.0f}s)")
            # Saving every update roughly doubles wall time at width 128;
            # every tenth is still plenty for crash recovery.
            if len(rows) % 10 == 0:
                save_checkpoint(ckpt, model, cfg, steps)
        final = greedy_rollout(vec.clients[0], model, cfg.query)
    with curve_path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CURVE_COLUMNS)
        for step, ret, best in rows:
            w.writerow([step, f"{ret:.9g}", f"{best:.9g}"])
    save_checkpoint(ckpt, model, cfg, steps)
    return TrainResult(ckpt, curve_path, steps, final.costs[-1])
