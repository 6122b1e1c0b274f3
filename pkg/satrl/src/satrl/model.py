"""Policy network: graph attention -> add pool -> LSTM -> two heads."""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .protocol import Observation

# Wire edges use attrs 0 (class->member) and 1 (node->child class); the
# model adds a self-loop per row under a third attr so rows without
# incoming edges (the root class) still attend to themselves.
SELF_LOOP_ATTR = 2
NUM_EDGE_ATTRS = 3


@dataclass
class GraphBatch:
    """Disjoint union of one graph per environment at a single timestep."""

    x: torch.Tensor           # (rows, feature_dim)
    edges: torch.Tensor       # (2, E) int64 into rows
    edge_attrs: torch.Tensor  # (E,) int64
    graph_ids: torch.Tensor   # (rows,) int64
    mask: torch.Tensor        # (batch, num_actions) bool
    num_graphs: int


def batch_observations(obs: list[Observation],
                       dtype: torch.dtype = torch.float32) -> GraphBatch:
    xs, edges, attrs, gids = [], [], [], []
    offset = 0
    for i, o in enumerate(obs):
        rows = o.nodes.shape[0]
        xs.append(torch.as_tensor(o.nodes, dtype=dtype))
        e = torch.as_tensor(o.edges, dtype=torch.int64) + offset
        loops = torch.arange(offset, offset + rows, dtype=torch.int64)
        edges.append(torch.cat([e, torch.stack([loops, loops])], dim=1))
        attrs.append(torch.cat([
            torch.as_tensor(o.edge_attrs, dtype=torch.int64),
            torch.full((rows,), SELF_LOOP_ATTR, dtype=torch.int64)]))
        gids.append(torch.full((rows,), i, dtype=torch.int64))
        offset += rows
    mask = torch.as_tensor(np.stack([o.mask for o in obs]))
    return GraphBatch(torch.cat(xs), torch.cat(edges, dim=1),
                      torch.cat(attrs), torch.cat(gids), mask, len(obs))


class GatLayer(nn.Module):
    """Multi-head graph attention with additive per-edge-attr logit bias."""

    def __init__(self, in_dim: int, out_dim: int, heads: int):
        super().__init__()
        if out_dim % heads:
            raise ValueError(f"width {out_dim} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = out_dim // heads
        self.proj = nn.Linear(in_dim, out_dim, bias=False)
        self.att_src = nn.Parameter(torch.empty(heads, self.head_dim))
        self.att_dst = nn.Parameter(torch.empty(heads, self.head_dim))
        self.att_edge = nn.Parameter(torch.empty(NUM_EDGE_ATTRS, heads))
        self.bias = nn.Parameter(torch.zeros(out_dim))
        nn.init.xavier_uniform_(self.att_src)
        nn.init.xavier_uniform_(self.att_dst)
        nn.init.zeros_(self.att_edge)

    def forward(self, x: torch.Tensor, edges: torch.Tensor,
                edge_attrs: torch.Tensor) -> torch.Tensor:
        rows = x.shape[0]
        h = self.proj(x).view(rows, self.heads, self.head_dim)
        src, dst = edges[0], edges[1]
        logit = torch.nn.functional.leaky_relu(
            (h[src] * self.att_src).sum(-1)
            + (h[dst] * self.att_dst).sum(-1)
            + self.att_edge[edge_attrs], 0.2)      # (E, heads)
        # Segment softmax over each row's incoming edges; the shift is
        # detached, which softmax is invariant to.
        peak = torch.full((rows, self.heads), float("-inf"),
                          dtype=logit.dtype, device=logit.device)
        peak.scatter_reduce_(0, dst.unsqueeze(-1).expand(-1, self.heads),
                             logit.detach(), "amax")
        weight = torch.exp(logit - peak[dst])
        denom = torch.zeros_like(peak).index_add(0, dst, weight)
        alpha = weight / denom[dst]
        out = torch.zeros_like(h).index_add(0, dst, alpha.unsqueeze(-1) * h[src])
        return out.reshape(rows, -1) + self.bias


def masked_logits(logits: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Inapplicable actions get -inf: zero probability, -inf log-prob."""
    return logits.masked_fill(~mask, float("-inf"))


def masked_entropy(logits: torch.Tensor) -> torch.Tensor:
    logp = torch.log_softmax(logits, dim=-1)
    p = logp.exp()
    finite = logp.clamp_min(torch.finfo(logp.dtype).min)
    return -(p * finite).sum(-1)


class PolicyNet(nn.Module):
    """Three attention layers, global add pool, LSTM cell, two heads.

    The recurrent state is carried across the steps of one episode and
    must be zero-initialized at every episode start.
    """

    def __init__(self, feature_dim: int, num_actions: int,
                 width: int = 128, heads: int = 4):
        super().__init__()
        self.feature_dim = feature_dim
        self.num_actions = num_actions
        self.width = width
        self.gat1 = GatLayer(feature_dim, width, heads)
        self.gat2 = GatLayer(width, width, heads)
        self.gat3 = GatLayer(width, width, heads)
        self.lstm = nn.LSTMCell(width, width)
        self.actor = nn.Linear(width, num_actions)
        self.critic = nn.Linear(width, 1)
        # Near-uniform initial policy over legal actions; without this the
        # random head biases exploration before any reward is seen.
        nn.init.orthogonal_(self.actor.weight, gain=0.01)
        nn.init.zeros_(self.actor.bias)
        nn.init.orthogonal_(self.critic.weight, gain=1.0)
        nn.init.zeros_(self.critic.bias)

    def initial_state(self, batch: int,
                      dtype: torch.dtype = torch.float32):
        z = torch.zeros(batch, self.width, dtype=dtype)
        return z, z.clone()

    def forward(self, gb: GraphBatch, state):
        if gb.x.shape[1] != self.feature_dim:
            raise ValueError(
                f"observation width {gb.x.shape[1]} != model {self.feature_dim}")
        x = torch.nn.functional.elu(self.gat1(gb.x, gb.edges, gb.edge_attrs))
        x = torch.nn.functional.elu(self.gat2(x, gb.edges, gb.edge_attrs))
        x = torch.nn.functional.elu(self.gat3(x, gb.edges, gb.edge_attrs))
        pooled = torch.zeros(gb.num_graphs, self.width,
                             dtype=x.dtype, device=x.device)
        pooled = pooled.index_add(0, gb.graph_ids, x)
        h, c = self.lstm(pooled, state)
        logits = masked_logits(self.actor(h), gb.mask)
        value = self.critic(h).squeeze(-1)
        return logits, value, (h, c)
