"""Plan extraction: greedy cost descent and an exact selection solver.

Greedy runs a Bellman fixpoint over class costs, then picks witnesses
bottom-up so that only grounded derivations are chosen; classes whose
every member loops through the class itself can never be selected, which
matters once rules like `x and x = x` introduce self-referential nodes.

The exact extractor encodes selection as a 0/1 program: one variable
per e-node, the root class picks exactly one, a chosen node forces a
choice in each child class, and fractional order variables rule out
cyclic selections.  It is solved by best-first branch and bound over
node choices with an admissible per-class lower bound; the LP-format
encoding is available for inspection or for feeding an external solver.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass
from typing import Optional

from .egraph import EGraph, ENode, node_key
from .errors import IlpCapExceeded, NoFiniteExtraction
from .ir import RaExpr

_TOL = 1e-9


@dataclass
class ExtractResult:
    expr: RaExpr
    total_cost: float
    choices: dict[int, ENode]
    method: str
    optimal: Optional[bool] = None
    lower_bound: Optional[float] = None
    explored: int = 0


def _node_cost(g: EGraph, node: ENode) -> float:
    return g.analysis.op_cost(node, g.data)


def _reachable(g: EGraph, root: int) -> list[int]:
    root = g.find(root)
    seen = {root}
    stack = [root]
    while stack:
        cid = stack.pop()
        for n in g.nodes_of(cid):
            for ch in n.children:
                c = g.find(ch)
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
    return sorted(seen)


def class_costs(g: EGraph, root: int) -> dict[int, float]:
    """Bellman fixpoint of minimal derivation cost per reachable class."""
    classes = _reachable(g, root)
    cost: dict[int, float] = {}
    changed = True
    while changed:
        changed = False
        for cid in classes:
            for n in g.nodes_of(cid):
                total = _node_cost(g, n)
                ok = True
                for ch in n.children:
                    c = cost.get(g.find(ch))
                    if c is None:
                        ok = False
                        break
                    total += c
                if ok and total < cost.get(cid, float("inf")) - _TOL:
                    cost[cid] = total
                    changed = True
    return cost


def greedy_extract(g: EGraph, root: int) -> ExtractResult:
    root = g.find(root)
    cost = class_costs(g, root)
    if root not in cost:
        raise NoFiniteExtraction("no grounded derivation reaches the root")

    # Second pass: select witnesses whose children are already selected
    # and whose cost attains the Bellman value.
    chosen: dict[int, ENode] = {}
    classes = _reachable(g, root)
    progress = True
    while root not in chosen and progress:
        progress = False
        for cid in classes:
            if cid in chosen or cid not in cost:
                continue
            for n in g.nodes_of(cid):
                if not all(g.find(ch) in chosen for ch in n.children):
                    continue
                total = _node_cost(g, n) + sum(cost[g.find(ch)] for ch in n.children)
                if total <= cost[cid] + _TOL:
                    chosen[cid] = n
                    progress = True
                    break
    if root not in chosen:
        raise NoFiniteExtraction("no grounded derivation reaches the root")

    def build(cid: int) -> RaExpr:
        n = chosen[g.find(cid)]
        return RaExpr(n.kind, n.payload, tuple(build(ch) for ch in n.children))

    return ExtractResult(build(root), cost[root], chosen, method="greedy")


def _full_witnesses(g: EGraph, root: int, cost: dict[int, float]) -> dict[int, ENode]:
    """Grounded witness per class, saturating past the root.

    Unlike the greedy pass this does not stop once the root is covered,
    so it yields a witness for every class with a finite Bellman cost.
    """
    chosen: dict[int, ENode] = {}
    classes = _reachable(g, root)
    progress = True
    while progress:
        progress = False
        for cid in classes:
            if cid in chosen or cid not in cost:
                continue
            for n in g.nodes_of(cid):
                if not all(g.find(ch) in chosen for ch in n.children):
                    continue
                total = _node_cost(g, n) + sum(cost[g.find(ch)] for ch in n.children)
                if total <= cost[cid] + _TOL:
                    chosen[cid] = n
                    progress = True
                    break
    return chosen


def tree_walk_cost(g: EGraph, choices: dict[int, ENode], root: int) -> float:
    """Cost of the chosen plan counting shared subplans once per use."""
    def walk(cid: int) -> float:
        n = choices[g.find(cid)]
        return _node_cost(g, n) + sum(walk(ch) for ch in n.children)
    return walk(g.find(root))


# -- exact selection ----------------------------------------------------

@dataclass
class IlpInstance:
    """Selection program over the e-graph reachable from `root`.

    `nodes[i]` is (class id, e-node, cost, child class ids); `classes`
    maps each class id to the indices of its member nodes.
    """

    root: int
    classes: dict[int, list[int]]
    nodes: list[tuple[int, ENode, float, tuple[int, ...]]]
    eps: float

    def to_lp(self) -> str:
        lines = ["Minimize", " obj:"]
        terms = []
        for i, (_, _, cost, _) in enumerate(self.nodes):
            terms.append(f" + {cost:.6f} x{i}")
        lines[1] += "".join(terms) if terms else " 0"
        lines.append("Subject To")
        root_vars = " + ".join(f"x{i}" for i in self.classes[self.root])
        lines.append(f" root: {root_vars} = 1")
        for i, (cid, _, _, children) in enumerate(self.nodes):
            for ch in children:
                members = " + ".join(f"x{j}" for j in self.classes[ch])
                lines.append(f" imp_{i}_{ch}: x{i} - {members} <= 0")
        for i, (cid, _, _, children) in enumerate(self.nodes):
            for ch in children:
                # t_child <= t_class - eps + (1 - x_i)
                lines.append(
                    f" ord_{i}_{ch}: t{ch} - t{cid} + x{i} <= {1.0 - self.eps:.9f}")
        lines.append("Bounds")
        for cid in sorted(self.classes):
            lines.append(f" 0 <= t{cid} <= 1")
        lines.append("Binary")
        lines.append(" " + " ".join(f"x{i}" for i in range(len(self.nodes))))
        lines.append("End")
        return "\n".join(lines) + "\n"


def build_instance(g: EGraph, root: int, node_cap: int = 5000) -> IlpInstance:
    root = g.find(root)
    class_ids = _reachable(g, root)
    nodes: list[tuple[int, ENode, float, tuple[int, ...]]] = []
    classes: dict[int, list[int]] = {c: [] for c in class_ids}
    for cid in class_ids:
        for n in g.nodes_of(cid):
            if len(nodes) >= node_cap:
                raise IlpCapExceeded(
                    f"e-graph exceeds the exact extraction cap of {node_cap} nodes")
            classes[cid].append(len(nodes))
            nodes.append((cid, n, _node_cost(g, n),
                          tuple(g.find(ch) for ch in n.children)))
    eps = 1.0 / (len(class_ids) + 1)
    return IlpInstance(root, classes, nodes, eps)


@dataclass
class BnbSolution:
    assignment: dict[int, int]  # class id -> node index
    cost: float
    optimal: bool
    lower_bound: float
    explored: int


def _selection_cost(inst: IlpInstance, assignment: dict[int, int]) -> Optional[float]:
    """DAG cost of an assignment, or None if it is cyclic/incomplete."""
    total = 0.0
    state: dict[int, int] = {}  # 0 on stack, 1 done

    def visit(cid: int) -> bool:
        nonlocal total
        st = state.get(cid)
        if st == 1:
            return True
        if st == 0:
            return False
        state[cid] = 0
        idx = assignment.get(cid)
        if idx is None:
            return False
        _, _, cost, children = inst.nodes[idx]
        for ch in children:
            if not visit(ch):
                return False
        state[cid] = 1
        total += cost
        return True

    return total if visit(inst.root) else None


def zero_cone_classes(inst: IlpInstance) -> set[int]:
    """Classes whose every reachable derivation costs exactly zero.

    Chosen nodes inside such a cone only ever reference other cone
    classes, so any grounded sub-selection there is interchangeable:
    it adds nothing to the objective and cannot close a cycle with the
    rest of the selection.
    """
    allzero = {cid: True for cid in inst.classes}
    changed = True
    while changed:
        changed = False
        for cid, idxs in inst.classes.items():
            if not allzero[cid]:
                continue
            for i in idxs:
                _, _, cost, children = inst.nodes[i]
                if cost > _TOL or not all(allzero[ch] for ch in children):
                    allzero[cid] = False
                    changed = True
                    break
    return {cid for cid, z in allzero.items() if z}


def solve_bnb(inst: IlpInstance, time_budget_ms: float = 30000.0,
              incumbent: Optional[dict[int, int]] = None,
              max_pops: Optional[int] = None,
              forced: Optional[dict[int, int]] = None) -> BnbSolution:
    """Best-first branch and bound over per-class node choices.

    `max_pops` caps search deterministically (unlike the wall-clock
    budget) so repeated runs return identical incumbents.  `forced`
    pins classes to a single node index; it must only carry choices
    that provably leave the optimum reachable (see zero_cone_classes).
    """
    deadline = time.monotonic() + time_budget_ms / 1000.0
    if forced is None:
        forced = {}
    min_node = {cid: min(inst.nodes[i][2] for i in idxs)
                for cid, idxs in inst.classes.items() if idxs}

    # Certainly-required closure, as bitmasks over class positions: the
    # least fixpoint of req(c) = {c} | AND over nodes (OR over children),
    # i.e. classes every grounded selection rooted at c must also pay
    # for.  Least (not greatest) fixpoint keeps the set an
    # under-approximation on cyclic classes, which is what admissibility
    # of the derived bound needs.
    pos = {cid: i for i, cid in enumerate(sorted(inst.classes))}
    wmin = [0.0] * len(pos)
    for cid, i in pos.items():
        wmin[i] = min_node.get(cid, 0.0)
    req = {cid: 0 for cid in inst.classes}
    changed = True
    while changed:
        changed = False
        for cid, idxs in inst.classes.items():
            acc = None
            for i in idxs:
                u = 0
                for ch in inst.nodes[i][3]:
                    u |= req[ch]
                acc = u if acc is None else acc & u
                if acc == 0:
                    break
            new = (1 << pos[cid]) | (acc or 0)
            if new != req[cid]:
                req[cid] = new
                changed = True

    def closure_bound(frontier: frozenset[int], amask: int) -> float:
        r = 0
        for f in frontier:
            r |= req[f]
        r &= ~amask
        lb = 0.0
        while r:
            b = r & -r
            lb += wmin[b.bit_length() - 1]
            r ^= b
        return lb

    best_assignment: Optional[dict[int, int]] = None
    best_cost = float("inf")
    if incumbent is not None:
        c = _selection_cost(inst, incumbent)
        if c is not None:
            best_assignment, best_cost = dict(incumbent), c

    # Heap entries: (bound, tiebreak, partial cost, assigned, frontier,
    # assigned-classes bitmask for the closure bound)
    counter = 0
    heap: list = []
    root_frontier = frozenset((inst.root,))
    heapq.heappush(heap, (closure_bound(root_frontier, 0), counter, 0.0,
                          {}, root_frontier, 0))
    explored = 0
    exhausted = True

    while heap:
        if max_pops is not None and explored >= max_pops:
            exhausted = False
            lower = min(heap[0][0], best_cost)
            break
        if explored % 32 == 0 and time.monotonic() > deadline:
            exhausted = False
            lower = min(heap[0][0], best_cost)
            break
        bound, _, partial, assigned, frontier, amask = heapq.heappop(heap)
        if bound >= best_cost - _TOL:
            # Best-first order: nothing left can beat the incumbent.
            break
        explored += 1
        if not frontier:
            cost = _selection_cost(inst, assigned)
            if cost is not None and cost < best_cost - _TOL:
                best_assignment, best_cost = assigned, cost
            continue
        # Most-constrained class first; pinned classes are free moves.
        cid = min(frontier,
                  key=lambda c: (c not in forced, len(inst.classes[c]), c))
        rest = frontier - {cid}
        for idx in ((forced[cid],) if cid in forced else inst.classes[cid]):
            _, _, cost, children = inst.nodes[idx]
            new_assigned = dict(assigned)
            new_assigned[cid] = idx
            new_frontier = rest | {ch for ch in children if ch not in new_assigned}
            new_partial = partial + cost
            new_amask = amask | (1 << pos[cid])
            new_bound = new_partial + closure_bound(new_frontier, new_amask)
            if new_bound >= best_cost - _TOL:
                continue
            counter += 1
            heapq.heappush(heap, (new_bound, counter, new_partial,
                                  new_assigned, new_frontier, new_amask))

    if best_assignment is None:
        raise NoFiniteExtraction("no acyclic selection reaches the root")
    if exhausted:
        lower = best_cost
    return BnbSolution(best_assignment, best_cost, exhausted, lower, explored)


def ilp_extract(g: EGraph, root: int, time_budget_ms: float = 30000.0,
                node_cap: int = 5000,
                max_pops: Optional[int] = None) -> ExtractResult:
    root = g.find(root)
    inst = build_instance(g, root, node_cap)
    cost = class_costs(g, root)
    if root not in cost:
        raise NoFiniteExtraction("no grounded derivation reaches the root")
    witness = _full_witnesses(g, root, cost)
    warm = {cid: inst.classes[cid][g.nodes_of(cid).index(n)]
            for cid, n in witness.items() if cid in inst.classes}
    forced = {cid: warm[cid]
              for cid in zero_cone_classes(inst) if cid in warm}
    sol = solve_bnb(inst, time_budget_ms, incumbent=warm, max_pops=max_pops,
                    forced=forced)

    chosen = {cid: inst.nodes[idx][1] for cid, idx in sol.assignment.items()}

    def build(cid: int) -> RaExpr:
        n = chosen[g.find(cid)]
        return RaExpr(n.kind, n.payload, tuple(build(ch) for ch in n.children))

    return ExtractResult(build(root), sol.cost, chosen, method="ilp",
                         optimal=sol.optimal, lower_bound=sol.lower_bound,
                         explored=sol.explored)
