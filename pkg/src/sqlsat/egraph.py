"""E-graph engine: congruence-closed sets of equivalent expressions.

The design follows the additive-rewriting recipe: rules only add nodes
and merge classes, never destroy.  Unions are cheap and mark classes
dirty; `rebuild` restores congruence in one deferred batch and then
propagates analysis values (cardinality, provenance, best cost) to a
fixpoint.  All iteration orders are pinned so that equal inputs produce
byte-identical serializations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Optional

from .errors import NodeBudgetExceeded, StaleSnapshot
from .ir import Col, RaExpr

_token_counter = itertools.count(1)


@dataclass(frozen=True)
class ENode:
    kind: str
    payload: Any
    children: tuple[int, ...]


def _payload_key(p: Any) -> str:
    return repr(p)


def node_key(n: ENode) -> tuple:
    return (n.kind, _payload_key(n.payload), n.children)


def payload_text(kind: str, p: Any) -> str:
    if p is None:
        return ""
    if kind == "scan":
        table, binding = p
        return table if binding == table else f"{table}:{binding}"
    if kind == "const":
        return f"{p[0]}:{p[1]!r}"
    if kind == "project":
        return ",".join(str(c) for c in p)
    if isinstance(p, Col):
        return str(p)
    return str(p)


def node_text(n: ENode, find: Callable[[int], int]) -> str:
    text = n.kind
    payload = payload_text(n.kind, n.payload)
    if payload:
        text += f"[{payload}]"
    if n.children:
        text += "(" + ",".join(f"e{find(c)}" for c in n.children) + ")"
    return text


class EClass:
    __slots__ = ("nodes", "parents", "data")

    def __init__(self):
        self.nodes: dict[ENode, None] = {}
        self.parents: list[tuple[ENode, int]] = []
        self.data: Any = None


@dataclass
class Snapshot:
    token: int
    uf: list[int]
    classes: dict[int, tuple[dict[ENode, None], list[tuple[ENode, int]], Any]]
    hashcons: dict[ENode, int]
    node_count: int
    dirty: list[int]
    analysis_dirty: list[int]
    version: int


class EGraph:
    def __init__(self, analysis=None, node_limit: Optional[int] = None):
        self.analysis = analysis
        self.node_limit = node_limit
        self.uf: list[int] = []
        self.classes: dict[int, EClass] = {}
        self.hashcons: dict[ENode, int] = {}
        self.dirty: list[int] = []
        self.analysis_dirty: list[int] = []
        self.node_count = 0
        self.token = next(_token_counter)
        self.version = 0

    # -- union-find ----------------------------------------------------

    def find(self, a: int) -> int:
        uf = self.uf
        while uf[a] != a:
            uf[a] = uf[uf[a]]
            a = uf[a]
        return a

    def canonicalize(self, n: ENode) -> ENode:
        return ENode(n.kind, n.payload, tuple(self.find(c) for c in n.children))

    def data(self, cid: int) -> Any:
        return self.classes[self.find(cid)].data

    # -- construction --------------------------------------------------

    def add(self, node: ENode) -> int:
        n = self.canonicalize(node)
        cid = self.hashcons.get(n)
        if cid is not None:
            return self.find(cid)
        if self.node_limit is not None and self.node_count + 1 > self.node_limit:
            raise NodeBudgetExceeded(
                f"adding a node would exceed the limit of {self.node_limit}")
        cid = len(self.uf)
        self.uf.append(cid)
        cls = EClass()
        cls.nodes[n] = None
        self.classes[cid] = cls
        self.hashcons[n] = cid
        self.node_count += 1
        for ch in dict.fromkeys(n.children):
            self.classes[self.find(ch)].parents.append((n, cid))
        if self.analysis is not None:
            cls.data = self.analysis.make(n, self.data)
        self.version += 1
        return cid

    def add_expr(self, expr: RaExpr) -> int:
        children = tuple(self.add_expr(c) for c in expr.children)
        return self.add(ENode(expr.kind, expr.payload, children))

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        keep, drop = (ra, rb) if ra < rb else (rb, ra)
        self.uf[drop] = keep
        kc, dc = self.classes[keep], self.classes.pop(drop)
        kc.nodes.update(dc.nodes)
        kc.parents.extend(dc.parents)
        if self.analysis is not None:
            joined = self.analysis.join(kc.data, dc.data)
            if joined != kc.data or joined != dc.data:
                kc.data = joined
                self.analysis_dirty.append(keep)
        self.dirty.append(keep)
        self.version += 1
        return keep

    # -- rebuilding ----------------------------------------------------

    def rebuild(self) -> int:
        """Restore congruence and analysis fixpoints; returns the number
        of class merges discovered."""
        merges = 0
        while self.dirty or self.analysis_dirty:
            while self.dirty:
                todo = sorted({self.find(c) for c in self.dirty})
                self.dirty = []
                for cid in todo:
                    merges += self._repair(cid)
            todo = sorted({self.find(c) for c in self.analysis_dirty})
            self.analysis_dirty = []
            for cid in todo:
                self._reanalyze(cid)
        self._compact()
        return merges

    def _repair(self, cid: int) -> int:
        cid = self.find(cid)
        cls = self.classes[cid]
        parents = cls.parents
        cls.parents = []
        merges = 0
        seen: dict[ENode, int] = {}
        for pnode, pcid in parents:
            self.hashcons.pop(pnode, None)
            pn = self.canonicalize(pnode)
            pc = self.find(pcid)
            existing = self.hashcons.get(pn)
            if existing is not None and self.find(existing) != pc:
                pc = self.union(existing, pc)
                merges += 1
            prev = seen.get(pn)
            if prev is not None and self.find(prev) != pc:
                pc = self.union(prev, pc)
                merges += 1
            pc = self.find(pc)
            seen[pn] = pc
            self.hashcons[pn] = pc
        target = self.classes[self.find(cid)]
        for pn, pc in seen.items():
            target.parents.append((pn, self.find(pc)))
        return merges

    def _reanalyze(self, cid: int) -> None:
        cid = self.find(cid)
        cls = self.classes.get(cid)
        if cls is None or self.analysis is None:
            return
        for pnode, pcid in list(cls.parents):
            pc = self.find(pcid)
            pcls = self.classes[pc]
            candidate = self.analysis.make(self.canonicalize(pnode), self.data)
            joined = self.analysis.join(pcls.data, candidate)
            if joined != pcls.data:
                pcls.data = joined
                self.analysis_dirty.append(pc)

    def _compact(self) -> None:
        count = 0
        for cid in sorted(self.classes):
            cls = self.classes[cid]
            nodes: dict[ENode, None] = {}
            for n in cls.nodes:
                nodes[self.canonicalize(n)] = None
            cls.nodes = nodes
            count += len(nodes)
        self.node_count = count
        self.hashcons = {n: self.find(c) for n, c in self.hashcons.items()}

    # -- queries -------------------------------------------------------

    def class_ids(self) -> list[int]:
        return sorted(self.classes)

    def nodes_of(self, cid: int) -> list[ENode]:
        cls = self.classes[self.find(cid)]
        return sorted(cls.nodes, key=node_key)

    def kinds_present(self) -> set[str]:
        return {n.kind for cls in self.classes.values() for n in cls.nodes}

    def serialize(self) -> str:
        lines = []
        for cid in self.class_ids():
            parts = sorted(node_text(n, self.find) for n in self.classes[cid].nodes)
            lines.append(f"e{cid}: " + " | ".join(parts))
        return "\n".join(lines) + "\n"

    def audit(self) -> list[str]:
        """Internal invariant check; returns violation descriptions."""
        problems = []
        owner: dict[ENode, int] = {}
        for cid, cls in self.classes.items():
            if self.find(cid) != cid:
                problems.append(f"class e{cid} stored under non-root id")
            for n in cls.nodes:
                cn = self.canonicalize(n)
                if cn != n:
                    problems.append(f"non-canonical node {node_text(n, self.find)} in e{cid}")
                if cn in owner and owner[cn] != cid:
                    problems.append(
                        f"node {node_text(cn, self.find)} in both e{owner[cn]} and e{cid}")
                owner[cn] = cid
        for n, cid in self.hashcons.items():
            cn = self.canonicalize(n)
            if cn in owner and self.find(cid) != owner[cn]:
                problems.append(f"hashcons points {node_text(cn, self.find)} at wrong class")
        for cn, cid in owner.items():
            if cn not in self.hashcons and self.canonicalize(cn) == cn:
                problems.append(f"node {node_text(cn, self.find)} missing from hashcons")
        if self.node_count != sum(len(c.nodes) for c in self.classes.values()):
            problems.append("node_count out of sync")
        return problems

    # -- snapshots -----------------------------------------------------

    def snapshot(self) -> Snapshot:
        classes = {cid: (dict(c.nodes), list(c.parents), c.data)
                   for cid, c in self.classes.items()}
        return Snapshot(self.token, list(self.uf), classes, dict(self.hashcons),
                        self.node_count, list(self.dirty), list(self.analysis_dirty),
                        self.version)

    def restore(self, snap: Snapshot) -> None:
        if snap.token != self.token:
            raise StaleSnapshot("snapshot belongs to a different graph")
        self.uf = list(snap.uf)
        self.classes = {}
        for cid, (nodes, parents, data) in snap.classes.items():
            cls = EClass()
            cls.nodes = dict(nodes)
            cls.parents = list(parents)
            cls.data = data
            self.classes[cid] = cls
        self.hashcons = dict(snap.hashcons)
        self.node_count = snap.node_count
        self.dirty = list(snap.dirty)
        self.analysis_dirty = list(snap.analysis_dirty)
        self.version = snap.version + 1


# -- patterns and matching ----------------------------------------------

@dataclass(frozen=True)
class PVar:
    """Matches any e-class, binding it by name."""

    name: str


@dataclass(frozen=True)
class PTag:
    """Matches any node payload, binding it by name."""

    name: str


@dataclass(frozen=True)
class PNode:
    kind: str
    payload: Any = None
    children: tuple = ()


Pattern = Any  # PVar | PNode


def pattern_vars(p: Pattern) -> tuple[set[str], set[str]]:
    """(class variables, tag variables) appearing in a pattern."""
    cvars: set[str] = set()
    tvars: set[str] = set()

    def walk(q):
        if isinstance(q, PVar):
            cvars.add(q.name)
            return
        if isinstance(q.payload, PTag):
            tvars.add(q.payload.name)
        for c in q.children:
            walk(c)

    walk(p)
    return cvars, tvars


def _subst_key(cid: int, subst: dict) -> tuple:
    return (cid, tuple(sorted((k, v if isinstance(v, int) else repr(v))
                              for k, v in subst.items())))


def ematch(g: EGraph, pattern: Pattern) -> list[tuple[int, dict]]:
    """All (class, substitution) pairs where `pattern` matches.

    Substitutions map class-variable names to e-class ids and
    tag-variable names to payloads.  Results are deterministic and
    deduplicated.
    """
    if isinstance(pattern, PNode) and pattern.kind not in g.kinds_present():
        return []

    def match_in(pat, cid: int, subst: dict) -> Iterator[dict]:
        cid = g.find(cid)
        if isinstance(pat, PVar):
            bound = subst.get(pat.name)
            if bound is None:
                yield {**subst, pat.name: cid}
            elif g.find(bound) == cid:
                yield subst
            return
        for node in g.nodes_of(cid):
            if node.kind != pat.kind:
                continue
            s = subst
            if isinstance(pat.payload, PTag):
                bound = s.get(pat.payload.name)
                if bound is None:
                    s = {**s, pat.payload.name: node.payload}
                elif bound != node.payload:
                    continue
            elif node.payload != pat.payload:
                continue

            def rec(i: int, s2: dict, children) -> Iterator[dict]:
                if i == len(children):
                    yield s2
                    return
                for s3 in match_in(pat.children[i], children[i], s2):
                    yield from rec(i + 1, s3, children)

            yield from rec(0, s, node.children)

    out: list[tuple[int, dict]] = []
    seen = set()
    for cid in g.class_ids():
        for subst in match_in(pattern, cid, {}):
            key = _subst_key(cid, subst)
            if key not in seen:
                seen.add(key)
                out.append((cid, subst))
    return out


def instantiate(g: EGraph, pat: Pattern, subst: dict) -> int:
    """Add the instantiation of `pat` under `subst`, returning its class."""
    if isinstance(pat, PVar):
        return g.find(subst[pat.name])
    payload = pat.payload
    if isinstance(payload, PTag):
        payload = subst[payload.name]
    children = tuple(instantiate(g, c, subst) for c in pat.children)
    return g.add(ENode(pat.kind, payload, children))


@dataclass
class ApplyReport:
    rule: str
    matches: int
    new_nodes: int
    new_unions: int
    saturated: bool


def apply_rule(g: EGraph, rule, guard_ctx=None) -> ApplyReport:
    """Apply one rewrite rule everywhere it matches, then rebuild.

    If any insertion would break the node budget the graph is rolled
    back to its pre-application state and the error propagates.
    """
    snap = g.snapshot()
    before = g.node_count
    matches = ematch(g, rule.lhs)
    applied = 0
    unions = 0
    try:
        for cid, subst in matches:
            if rule.guard is not None:
                ctx = guard_ctx if guard_ctx is not None else EGraphGuardCtx(g)
                if not rule.guard(ctx, subst):
                    continue
            applied += 1
            rhs_cid = instantiate(g, rule.rhs, subst)
            if g.find(rhs_cid) != g.find(cid):
                g.union(cid, rhs_cid)
                unions += 1
        unions += g.rebuild()
    except NodeBudgetExceeded:
        g.restore(snap)
        raise
    delta = g.node_count - before
    return ApplyReport(rule.name, applied, delta, unions,
                       saturated=(delta == 0 and unions == 0))


class EGraphGuardCtx:
    """Guard view of an e-graph: provenance and node structure."""

    def __init__(self, g: EGraph):
        self.g = g

    def prov(self, ref: int) -> frozenset:
        data = self.g.data(ref)
        if data is None:
            raise TypeError("guarded rules need an analysis-enabled graph")
        return data.cols

    def nodes(self, ref: int):
        for n in self.g.nodes_of(ref):
            yield (n.kind, n.payload, n.children)

    def key(self, ref: int) -> int:
        return self.g.find(ref)
