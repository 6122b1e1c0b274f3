"""Shared helpers for the trainer tests."""

import numpy as np

from satrl.protocol import Observation


def make_obs(rows: int, feature_dim: int = 6, num_actions: int = 5,
             seed: int = 0) -> Observation:
    """Chain-shaped synthetic observation with action 0 masked off."""
    rng = np.random.default_rng(seed)
    nodes = rng.normal(size=(rows, feature_dim)).astype(np.float32)
    edges = np.stack([np.arange(rows - 1), np.arange(1, rows)]).astype(np.int64)
    attrs = (np.arange(rows - 1) % 2).astype(np.int64)
    mask = np.ones(num_actions, dtype=bool)
    mask[0] = False
    return Observation(nodes, edges, attrs, mask,
                       np.zeros(2, dtype=np.float32))
