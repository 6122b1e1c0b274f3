"""Network shapes, masking, batching, and recurrent-state conventions."""

import numpy as np
import pytest
import torch

from satrl.model import (GraphBatch, PolicyNet, SELF_LOOP_ATTR,
                         batch_observations, masked_logits)
from conftest import make_obs
from satrl.protocol import Observation


def test_batching_offsets_rows_and_adds_self_loops():
    a, b = make_obs(3, seed=1), make_obs(2, seed=2)
    gb = batch_observations([a, b])
    assert gb.x.shape == (5, 6)
    assert gb.num_graphs == 2
    assert gb.graph_ids.tolist() == [0, 0, 0, 1, 1]
    # a has 2 wire edges + 3 loops, b has 1 wire edge + 2 loops
    assert gb.edges.shape == (2, 8)
    loops = gb.edge_attrs == SELF_LOOP_ATTR
    assert loops.sum() == 5
    assert (gb.edges[0][loops] == gb.edges[1][loops]).all()
    # b's wire edge (its first column after a's block) is offset by a's rows
    assert gb.edges[:, 5].tolist() == [3, 4]
    assert gb.mask.shape == (2, 5)


def test_forward_masks_logits_and_values_are_scalar_per_graph():
    torch.manual_seed(0)
    model = PolicyNet(6, 5, width=8, heads=2)
    gb = batch_observations([make_obs(3), make_obs(4)])
    logits, value, (h, c) = model(gb, model.initial_state(2))
    assert logits.shape == (2, 5) and value.shape == (2,)
    assert (logits[:, 0] == float("-inf")).all()
    assert torch.isfinite(logits[:, 1:]).all()
    probs = torch.softmax(logits, dim=-1)
    assert torch.allclose(probs.sum(-1), torch.ones(2))
    assert (probs[:, 0] == 0).all()
    assert h.shape == (2, 8) and c.shape == (2, 8)


def test_single_legal_action_gets_probability_one():
    torch.manual_seed(0)
    model = PolicyNet(6, 5, width=8, heads=2)
    o = make_obs(1)
    o.mask[:] = False
    o.mask[4] = True
    o = Observation(o.nodes, np.zeros((2, 0), dtype=np.int64),
                    np.zeros(0, dtype=np.int64), o.mask, o.context)
    logits, _, _ = model(batch_observations([o]), model.initial_state(1))
    probs = torch.softmax(logits, dim=-1)
    assert probs[0].tolist() == [0.0, 0.0, 0.0, 0.0, 1.0]


def test_recurrent_state_starts_at_zero():
    model = PolicyNet(6, 5, width=8, heads=2)
    h, c = model.initial_state(3)
    assert (h == 0).all() and (c == 0).all()
    assert h.shape == (3, 8)


def test_masked_logits_keeps_unmasked_values():
    logits = torch.tensor([[1.0, 2.0, 3.0]])
    mask = torch.tensor([[True, False, True]])
    out = masked_logits(logits, mask)
    assert out[0].tolist() == [1.0, float("-inf"), 3.0]


def test_width_must_divide_by_heads():
    with pytest.raises(ValueError):
        PolicyNet(6, 5, width=9, heads=2)


def test_feature_width_mismatch_is_rejected():
    model = PolicyNet(8, 5, width=8, heads=2)
    gb = batch_observations([make_obs(3, feature_dim=6)])
    with pytest.raises(ValueError):
        model(gb, model.initial_state(1))
