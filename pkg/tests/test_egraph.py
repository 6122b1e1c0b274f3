"""E-graph engine: congruence closure, hashconsing, snapshots, budgets."""

import random

import pytest

from sqlsat.egraph import EGraph, ENode, node_key
from sqlsat.errors import NodeBudgetExceeded, StaleSnapshot


def random_graph(rng, n_ops=12, n_unions=4):
    """A small random e-graph plus the raw (op, child leaders) facts."""
    g = EGraph()
    ids = []
    for i in range(n_ops):
        arity = rng.randrange(0, min(2, len(ids)) + 1) if ids else 0
        children = tuple(rng.choice(ids) for _ in range(arity))
        op = f"f{rng.randrange(4)}"
        ids.append(g.add(ENode(op, None, children)))
    pairs = []
    for _ in range(n_unions):
        a, b = rng.choice(ids), rng.choice(ids)
        pairs.append((a, b))
        g.union(a, b)
    g.rebuild()
    return g, ids, pairs


def naive_congruence(facts, pairs):
    """Fixpoint congruence closure over explicit (id, op, children) facts."""
    parent = {i: i for i, _, _ in facts}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            return True
        return False

    for a, b in pairs:
        union(a, b)
    changed = True
    while changed:
        changed = False
        by_sig = {}
        for i, op, children in facts:
            sig = (op, tuple(find(c) for c in children))
            if sig in by_sig:
                if union(by_sig[sig], i):
                    changed = True
            else:
                by_sig[sig] = i
    return {i: find(i) for i, _, _ in facts}


def test_congruence_matches_naive_closure():
    rng = random.Random(11)
    for _ in range(300):
        g = EGraph()
        ids = []
        facts = []
        for i in range(rng.randrange(4, 14)):
            arity = rng.randrange(0, min(2, len(ids)) + 1) if ids else 0
            children = tuple(rng.choice(range(len(ids))) for _ in range(arity))
            op = f"f{rng.randrange(4)}"
            ids.append(g.add(ENode(op, None, tuple(ids[c] for c in children))))
            facts.append((i, op, children))
        pairs = []
        for _ in range(rng.randrange(0, 5)):
            a, b = rng.randrange(len(ids)), rng.randrange(len(ids))
            pairs.append((a, b))
            g.union(ids[a], ids[b])
        g.rebuild()
        want = naive_congruence(facts, pairs)
        for i in range(len(ids)):
            for j in range(len(ids)):
                same_naive = want[i] == want[j]
                same_graph = g.find(ids[i]) == g.find(ids[j])
                assert same_naive == same_graph, (i, j, facts, pairs)


def test_hashcons_unique_after_rebuild():
    rng = random.Random(23)
    for _ in range(200):
        g, ids, _ = random_graph(rng)
        seen = set()
        for cid in g.class_ids():
            for n in g.nodes_of(cid):
                key = node_key(g.canonicalize(n))
                assert key not in seen, key
                seen.add(key)
        assert g.audit() == []


def test_add_is_idempotent():
    g = EGraph()
    x = g.add(ENode("x", None, ()))
    y = g.add(ENode("x", None, ()))
    assert x == y
    fx = g.add(ENode("f", None, (x,)))
    fx2 = g.add(ENode("f", None, (x,)))
    assert fx == fx2


def test_union_merges_parents():
    g = EGraph()
    x = g.add(ENode("x", None, ()))
    y = g.add(ENode("y", None, ()))
    fx = g.add(ENode("f", None, (x,)))
    fy = g.add(ENode("f", None, (y,)))
    assert g.find(fx) != g.find(fy)
    g.union(x, y)
    g.rebuild()
    assert g.find(fx) == g.find(fy)


def test_congruence_chains_upward():
    # Merging leaves must collapse a whole tower of parents.
    g = EGraph()
    x = g.add(ENode("x", None, ()))
    y = g.add(ENode("y", None, ()))
    gx = g.add(ENode("g", None, (x,)))
    gy = g.add(ENode("g", None, (y,)))
    hgx = g.add(ENode("h", None, (gx, x)))
    hgy = g.add(ENode("h", None, (gy, y)))
    g.union(x, y)
    g.rebuild()
    assert g.find(gx) == g.find(gy)
    assert g.find(hgx) == g.find(hgy)
    assert g.audit() == []


def test_node_count_tracks_canonical_nodes():
    rng = random.Random(5)
    for _ in range(100):
        g, _, _ = random_graph(rng)
        want = sum(len(g.nodes_of(c)) for c in g.class_ids())
        assert g.node_count == want


def test_snapshot_restore_roundtrip():
    rng = random.Random(41)
    for _ in range(60):
        g, ids, _ = random_graph(rng)
        before = g.serialize()
        snap = g.snapshot()
        extra = g.add(ENode("extra", None, (rng.choice(ids),)))
        g.union(extra, rng.choice(ids))
        g.rebuild()
        g.restore(snap)
        assert g.serialize() == before


def test_snapshot_restores_in_any_order_within_one_graph():
    g = EGraph()
    a = g.add(ENode("a", None, ()))
    s1 = g.snapshot()
    g.add(ENode("b", None, (a,)))
    g.rebuild()
    s2 = g.snapshot()
    g.restore(s1)
    g.restore(s2)
    g.restore(s1)
    assert g.node_count == 1


def test_snapshot_of_other_graph_is_rejected():
    g = EGraph()
    g.add(ENode("a", None, ()))
    other = EGraph()
    other.add(ENode("a", None, ()))
    with pytest.raises(StaleSnapshot):
        g.restore(other.snapshot())


def test_node_budget_blocks_add():
    g = EGraph(node_limit=3)
    a = g.add(ENode("a", None, ()))
    b = g.add(ENode("b", None, ()))
    g.add(ENode("f", None, (a, b)))
    with pytest.raises(NodeBudgetExceeded):
        g.add(ENode("g", None, (a, b)))
    # The failed add must not leave a partial node behind.
    assert g.node_count == 3
    assert g.audit() == []
