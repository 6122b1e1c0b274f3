"""Step-based rewriting environment over the e-graph.

Actions 0..33 apply one catalog rule everywhere it matches; action 34
extracts the current best plan and restarts the e-graph from it, which
frees the node budget without losing optimization progress.  The
observation is the whole e-graph as a typed directed graph: one feature
row per e-class and per e-node, membership edges from a class to its
nodes, and child edges from a node to the classes it references.

Rewards favor cost reduction: w_cost * (log prev_cost - log new_cost),
minus w_saturated when the action changed nothing, minus w_growth
scaled by the fraction of the node budget the action consumed.  An
action that would break the node budget is rolled back and costs a flat
w_growth penalty; only the horizon ends an episode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .catalog import Catalog
from .costs import CostAnalysis
from .egraph import EGraph, ENode, apply_rule, ematch, EGraphGuardCtx
from .errors import (
    EpisodeFinished,
    InvalidAction,
    NodeBudgetExceeded,
    VocabularyOverflow,
)
from .extract import greedy_extract
from .ir import RaExpr
from .rules import RULE_COUNT, catalog as rules_catalog

VOCAB = (
    "scan", "filter", "project", "join_inner", "join_hash", "derived",
    "col", "const_int", "const_str", "const_bool",
    "add", "sub", "mul", "div", "shl",
    "eq", "ne", "lt", "gt", "le", "ge",
    "and", "or", "not",
)


def vocab_token(node: ENode) -> str:
    if node.kind == "join":
        return f"join_{node.payload}"
    if node.kind == "const":
        return f"const_{node.payload[0]}"
    return node.kind


@dataclass(frozen=True)
class EnvConfig:
    node_limit: int = 1000
    horizon: int = 200
    vocab_size: int = 64
    w_cost: float = 1.0
    w_saturated: float = 0.1
    w_growth: float = 0.1

    @property
    def feature_dim(self) -> int:
        return 2 + self.vocab_size + 3


@dataclass
class Observation:
    nodes: np.ndarray       # (rows, feature_dim) float32
    edges: np.ndarray       # (2, E) int64, row indices
    edge_attrs: np.ndarray  # (E,) int64: 0 class->node, 1 node->class
    mask: np.ndarray        # (num_actions,) bool
    context: np.ndarray     # (2,) float32: step fraction, node fraction


@dataclass
class StepResult:
    obs: Observation
    reward: float
    done: bool
    info: dict


@dataclass
class StepRecord:
    step: int
    action: int
    rule: str
    reward: float
    cost: float
    nodes: int
    saturated: bool
    rolled_back: bool


class RewriteEnv:
    """Episodic rewriting over one query."""

    RESET_ACTION = RULE_COUNT

    def __init__(self, query: RaExpr, catalog: Catalog,
                 config: EnvConfig = EnvConfig(), rules=None):
        self.query = query
        self.catalog = catalog
        self.config = config
        self.rules = tuple(rules) if rules is not None else rules_catalog()
        self._vocab_index = {tok: i for i, tok in enumerate(VOCAB)}
        self.g: EGraph | None = None
        self.root = -1
        self.t = 0
        self.finished = True
        self.trace: list[StepRecord] = []
        self._mask_cache: tuple[int, np.ndarray] | None = None

    @property
    def num_actions(self) -> int:
        return len(self.rules) + 1

    def reset(self) -> Observation:
        self.g, self.root = self._fresh_graph(self.query)
        self.t = 0
        self.finished = False
        self.trace = []
        self._mask_cache = None
        return self.encode()

    def _fresh_graph(self, expr: RaExpr) -> tuple[EGraph, int]:
        g = EGraph(analysis=CostAnalysis(self.catalog),
                   node_limit=self.config.node_limit)
        root = g.add_expr(expr)
        g.rebuild()
        return g, root

    def current_cost(self) -> float:
        return self.g.data(self.root).best_cost

    def node_count(self) -> int:
        return self.g.node_count

    # -- actions -------------------------------------------------------

    def step(self, action: int) -> StepResult:
        if self.finished or self.g is None:
            raise EpisodeFinished("call reset() before stepping")
        reward, info = self._apply(action)
        self.t += 1
        if self.t >= self.config.horizon:
            self.finished = True
        self._mask_cache = None
        self.trace.append(StepRecord(
            self.t, action, info.get("rule", "reset"), reward,
            info["cost"], info["nodes"], info.get("saturated", False),
            info.get("rolled_back", False)))
        return StepResult(self.encode(), reward, self.finished, info)

    def simulate(self, action: int) -> tuple[float, dict]:
        """Evaluate one action without committing it."""
        g, root, t = self.g, self.root, self.t
        snap = g.snapshot()
        try:
            return self._apply(action)
        finally:
            g.restore(snap)
            self.g, self.root, self.t = g, root, t

    def _apply(self, action: int) -> tuple[float, dict]:
        cfg = self.config
        if not isinstance(action, int) or not 0 <= action < self.num_actions:
            raise InvalidAction(f"action {action!r} outside 0..{self.num_actions - 1}")
        prev_cost = self.current_cost()
        prev_nodes = self.g.node_count

        if action == self.RESET_ACTION:
            extracted = greedy_extract(self.g, self.root)
            self.g, self.root = self._fresh_graph(extracted.expr)
            new_cost = self.current_cost()
            delta = self.g.node_count - prev_nodes
            reward = (cfg.w_cost * (self._log(prev_cost) - self._log(new_cost))
                      - cfg.w_growth * max(0, delta) / cfg.node_limit)
            return reward, {
                "rule": "reset", "reset": True, "applied": 0,
                "new_nodes": delta, "new_unions": 0, "saturated": False,
                "rolled_back": False, "cost": new_cost, "nodes": self.g.node_count,
            }

        rule = self.rules[action]
        try:
            report = apply_rule(self.g, rule)
        except NodeBudgetExceeded:
            return -cfg.w_growth, {
                "rule": rule.name, "reset": False, "applied": 0,
                "new_nodes": 0, "new_unions": 0, "saturated": False,
                "rolled_back": True, "cost": prev_cost, "nodes": self.g.node_count,
            }
        new_cost = self.current_cost()
        reward = (cfg.w_cost * (self._log(prev_cost) - self._log(new_cost))
                  - cfg.w_saturated * (1.0 if report.saturated else 0.0)
                  - cfg.w_growth * max(0, report.new_nodes) / cfg.node_limit)
        return reward, {
            "rule": rule.name, "reset": False, "applied": report.matches,
            "new_nodes": report.new_nodes, "new_unions": report.new_unions,
            "saturated": report.saturated, "rolled_back": False,
            "cost": new_cost, "nodes": self.g.node_count,
        }

    @staticmethod
    def _log(x: float) -> float:
        return math.log(max(x, 1e-9))

    # -- observations --------------------------------------------------

    def action_mask(self) -> np.ndarray:
        if self._mask_cache is not None and self._mask_cache[0] == self.g.version:
            return self._mask_cache[1]
        mask = np.zeros(self.num_actions, dtype=bool)
        mask[self.RESET_ACTION] = True
        present = self.g.kinds_present()
        ctx = EGraphGuardCtx(self.g)
        for i, rule in enumerate(self.rules):
            if rule.lhs.kind not in present:
                continue
            matches = ematch(self.g, rule.lhs)
            if rule.guard is None:
                mask[i] = bool(matches)
            else:
                mask[i] = any(rule.guard(ctx, s) for _, s in matches)
        self._mask_cache = (self.g.version, mask)
        return mask

    def encode(self) -> Observation:
        cfg = self.config
        g = self.g
        rows: list[tuple] = []
        class_row: dict[int, int] = {}
        for cid in g.class_ids():
            class_row[cid] = len(rows)
            rows.append(("class", cid, None))
            for n in g.nodes_of(cid):
                rows.append(("node", cid, n))

        feats = np.zeros((len(rows), cfg.feature_dim), dtype=np.float32)
        edges_src: list[int] = []
        edges_dst: list[int] = []
        attrs: list[int] = []
        for i, (tag, cid, n) in enumerate(rows):
            data = g.data(cid)
            if tag == "class":
                feats[i, 0] = 1.0
                feats[i, 2 + cfg.vocab_size] = math.log1p(max(data.card, 0.0))
                feats[i, 3 + cfg.vocab_size] = float(data.width_cols)
                feats[i, 4 + cfg.vocab_size] = math.log1p(max(data.best_cost, 0.0))
            else:
                tok = vocab_token(n)
                idx = self._vocab_index.get(tok)
                if idx is None or idx >= cfg.vocab_size:
                    raise VocabularyOverflow(f"operator {tok!r} has no encoding slot")
                feats[i, 1] = 1.0
                feats[i, 2 + idx] = 1.0
                feats[i, 2 + cfg.vocab_size] = math.log1p(max(data.card, 0.0))
                feats[i, 3 + cfg.vocab_size] = float(data.width_cols)
                feats[i, 4 + cfg.vocab_size] = math.log1p(
                    max(g.analysis.op_cost(n, g.data), 0.0))
                edges_src.append(class_row[cid])
                edges_dst.append(i)
                attrs.append(0)
                for ch in n.children:
                    edges_src.append(i)
                    edges_dst.append(class_row[g.find(ch)])
                    attrs.append(1)

        edges = np.array([edges_src, edges_dst], dtype=np.int64) if edges_src \
            else np.zeros((2, 0), dtype=np.int64)
        context = np.array([
            self.t / cfg.horizon,
            g.node_count / cfg.node_limit,
        ], dtype=np.float32)
        return Observation(feats, edges, np.array(attrs, dtype=np.int64),
                           self.action_mask().copy(), context)
