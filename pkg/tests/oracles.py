"""Independent reference implementations used to check the library.

Nothing here imports the code under test except the graph container and
operator records, which are only read.
"""
from __future__ import annotations

import itertools
import math
import random
from collections import deque

import numpy as np

from fcgprobe.graph import FunctionCallGraph, NodeKind
from fcgprobe.perturb import OpKind


# -- random inputs -------------------------------------------------------------

def random_graph(rng: random.Random, max_nodes: int = 50, density: float = 0.08,
                 n_synthetic: int = 0) -> FunctionCallGraph:
    n = rng.randint(2, max_nodes)
    g = FunctionCallGraph()
    n_sys = rng.randint(1, max(1, n // 3))
    for i in range(n - n_sys):
        kind = NodeKind.SYNTHETIC if i < n_synthetic else NodeKind.USER
        g.add_node(kind, None if kind is NodeKind.SYNTHETIC else f"com.app.C{i}.m")
    for i in range(n_sys):
        g.add_node(NodeKind.SYSTEM, f"android.api.Api{i}.call")
    users = [v for v in g.nodes() if g.kinds[v] is not NodeKind.SYSTEM]
    for u in users:
        for v in g.nodes():
            if u != v and rng.random() < density:
                g.add_edge(u, v)
    return g


def as_sets(g: FunctionCallGraph):
    """(user-like nodes, system nodes, edges) as plain sets."""
    users = {n for n, k in g.kinds.items() if k is not NodeKind.SYSTEM}
    systems = {n for n, k in g.kinds.items() if k is NodeKind.SYSTEM}
    edges = {(u, v) for u in g.succ for v in g.succ[u]}
    return users, systems, edges


# -- centrality ------------------------------------------------------------------

def bfs_to(edges: set, n_nodes_ids, v) -> dict:
    """Shortest directed distance from every node that can reach v."""
    preds = {n: [] for n in n_nodes_ids}
    for a, b in edges:
        preds[b].append(a)
    dist = {v: 0}
    q = deque([v])
    while q:
        w = q.popleft()
        for u in preds[w]:
            if u not in dist:
                dist[u] = dist[w] + 1
                q.append(u)
    return dist


def degree_oracle(g, v) -> float:
    _, _, edges = as_sets(g)
    touching = sum(1 for a, b in edges if v in (a, b))
    return touching / (g.n_nodes - 1)


def harmonic_oracle(g, v) -> float:
    _, _, edges = as_sets(g)
    dist = bfs_to(edges, g.kinds, v)
    return math.fsum(1.0 / d for d in dist.values() if d)


def closeness_oracle(g, v) -> float:
    """Wasserman-Faust closeness over inbound distances."""
    _, _, edges = as_sets(g)
    dist = bfs_to(edges, g.kinds, v)
    total = sum(dist.values())
    if total == 0:
        return 0.0
    r = len(dist) - 1
    return (r / total) * (r / (g.n_nodes - 1))


def katz_series(g, alpha: float, k_max: int = 50) -> dict:
    """sum_{k=1..k_max} alpha^k (A^T)^k 1, by dense matrix powers."""
    order = sorted(g.kinds)
    idx = {n: i for i, n in enumerate(order)}
    a = np.zeros((len(order), len(order)))
    for u, v in as_sets(g)[2]:
        a[idx[u], idx[v]] = 1.0
    term = np.ones(len(order))
    total = np.zeros(len(order))
    for _ in range(k_max):
        term = alpha * (a.T @ term)
        total += term
    return {n: total[idx[n]] for n in order}


def markov_oracle(g, state_of, n_states: int) -> np.ndarray:
    counts = [[0] * n_states for _ in range(n_states)]
    for u, v in as_sets(g)[2]:
        counts[state_of(u)][state_of(v)] += 1
    out = []
    for row in counts:
        s = sum(row)
        out.extend([c / s if s else 0.0 for c in row])
    return np.array(out)


# -- operators as set algebra ----------------------------------------------------

def expected_post_state(g, op):
    """(users, systems, edges) after ``op``, computed on plain sets."""
    users, systems, edges = as_sets(g)
    users, edges = set(users), set(edges)
    k = op.kind
    if k is OpKind.ADD_NODE:
        users.add(op.new_id)
        edges.add((op.caller, op.new_id))
    elif k is OpKind.ADD_EDGE:
        edges.add((op.caller, op.callee))
    elif k is OpKind.REWIRE:
        edges -= {(op.caller, op.callee)}
        edges |= {(op.caller, op.mid), (op.mid, op.callee)}
    elif k is OpKind.REMOVE_NODE:
        d = op.target
        callers = {a for a, b in edges if b == d}
        callees = {b for a, b in edges if a == d}
        edges = {(a, b) for a, b in edges if d not in (a, b)}
        edges |= {(h, c) for h in callers for c in callees if h != c}
        users.discard(d)
    elif k in (OpKind.ADD_SPARSE_NODES, OpKind.ADD_DENSE_NODES):
        users |= set(op.new_ids)
        edges |= {(op.anchor, v) for v in op.new_ids}
        if k is OpKind.ADD_DENSE_NODES:
            edges |= set(itertools.combinations(op.new_ids, 2))
    else:
        for chain in op.chains:
            users |= set(chain)
            path = (op.source, *chain, op.target)
            edges |= set(zip(path, path[1:]))
    return users, systems, edges


def snapshot(g: FunctionCallGraph):
    """Everything observable about a graph, for bit-identity checks."""
    return (
        dict(g.kinds), dict(g.labels),
        {n: frozenset(s) for n, s in g.succ.items()},
        {n: frozenset(s) for n, s in g.pred.items()},
        g.next_id, g.n_edges,
    )


# -- Shapley values ---------------------------------------------------------------

def exact_shapley(f, baseline, x) -> np.ndarray:
    """Subset enumeration with the classic |S|!(d-|S|-1)!/d! weights."""
    d = len(x)
    phi = np.zeros(d)
    cache = {}

    def value(mask):
        if mask not in cache:
            z = np.array([x[i] if mask >> i & 1 else baseline[i] for i in range(d)])
            cache[mask] = float(np.asarray(f(z[None, :]))[0])
        return cache[mask]

    for i in range(d):
        for mask in range(1 << d):
            if mask >> i & 1:
                continue
            s = bin(mask).count("1")
            w = math.factorial(s) * math.factorial(d - s - 1) / math.factorial(d)
            phi[i] += w * (value(mask | 1 << i) - value(mask))
    return phi


# -- constraints --------------------------------------------------------------------

def in_interval(v, c) -> bool:
    lo_ok = v > c.lower or (c.lower_closed and v == c.lower)
    hi_ok = v < c.upper or (c.upper_closed and v == c.upper)
    return lo_ok and hi_ok


def membership_count(constraints, x) -> int:
    return sum(1 for c in constraints if in_interval(x[c.feature], c))


# -- raw operator proposals ---------------------------------------------------------

def raw_op(rng: random.Random, g: FunctionCallGraph):
    """Any operator over existing or bogus ids; roughly half are invalid."""
    from fcgprobe.perturb import (
        AddDenseNodes, AddEdge, AddLongEdges, AddNode, AddSparseNodes, RemoveNode, Rewire,
    )

    ids = sorted(g.kinds)
    bogus = g.next_id + 50

    def ref():
        return rng.choice(ids) if ids and rng.random() < 0.95 else bogus

    def fresh(k):
        start = g.next_id + rng.randint(0, 3)
        out = list(range(start, start + k))
        if ids and rng.random() < 0.05:
            out[0] = rng.choice(ids)
        return tuple(out)

    kind = rng.randrange(7)
    if kind == 0:
        return AddNode(ref(), fresh(1)[0])
    if kind == 1:
        return AddEdge(ref(), ref())
    if kind == 2:
        edges = sorted(as_sets(g)[2])
        a, d = rng.choice(edges) if edges and rng.random() < 0.8 else (ref(), ref())
        return Rewire(a, d, ref())
    if kind == 3:
        return RemoveNode(ref())
    if kind in (4, 5):
        cls = AddSparseNodes if kind == 4 else AddDenseNodes
        return cls(ref(), fresh(rng.randint(1, 5)))
    m, k = rng.randint(1, 3), rng.randint(1, 3)
    flat = fresh(m * k)
    return AddLongEdges(ref(), ref(), tuple(flat[j * k:(j + 1) * k] for j in range(m)))


def expected_valid(g: FunctionCallGraph, op) -> bool:
    """Operator preconditions, restated over plain sets."""
    users, systems, edges = as_sets(g)
    nodes = users | systems
    k = op.kind

    def fresh(new):
        return len(set(new)) == len(new) and not set(new) & nodes

    def addable(u, v):
        return u != v and (u, v) not in edges

    if k is OpKind.ADD_NODE:
        return op.caller in users and fresh(op.new_ids)
    if k is OpKind.ADD_EDGE:
        return op.caller in users and op.callee in nodes and addable(op.caller, op.callee)
    if k is OpKind.REWIRE:
        a, d, h = op.caller, op.callee, op.mid
        return ((a, d) in edges and h in users and h not in (a, d)
                and addable(a, h) and addable(h, d))
    if k is OpKind.REMOVE_NODE:
        d = op.target
        if d not in users:
            return False
        has_caller = any(b == d for _, b in edges)
        for c in systems:
            callers = {a for a, b in edges if b == c}
            if not has_caller and callers == {d}:
                return False
        return True
    if k in (OpKind.ADD_SPARSE_NODES, OpKind.ADD_DENSE_NODES):
        return op.anchor in users and len(op.new_ids) >= 1 and fresh(op.new_ids)
    return (op.source in users and op.target in systems and len(op.chains) >= 1
            and len({len(c) for c in op.chains}) == 1 and len(op.chains[0]) >= 1
            and fresh(op.new_ids))


# -- search logs --------------------------------------------------------------------

def elitist_monotone(rows, tol: float = 1e-12) -> bool:
    """Within a segment the best (f1, f2) never gets lexicographically worse."""
    for prev, cur in zip(rows, rows[1:]):
        if prev["segment"] != cur["segment"]:
            continue
        if cur["best_f1"] < prev["best_f1"] - tol:
            return False
        if abs(cur["best_f1"] - prev["best_f1"]) <= tol and prev["best_f2"] is not None:
            if cur["best_f2"] < prev["best_f2"] - tol and cur["best_f1"] <= prev["best_f1"] + tol:
                return False
    return True


# -- random trees and constraints ----------------------------------------------------

def random_tree(rng, d: int, depth: int = 3):
    """A random decision tree with rounded thresholds, so ties are common."""
    from fcgprobe.models.trees import LEAF, DecisionTree

    feature, threshold, left, right, value = [], [], [], [], []

    def grow(level):
        i = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(int(rng.integers(0, 2)))
        if level < depth and rng.random() < 0.8:
            feature[i] = int(rng.integers(0, d))
            threshold[i] = float(np.round(rng.uniform(-1, 1), 2))
            left[i] = grow(level + 1)
            right[i] = grow(level + 1)
        return i

    grow(0)
    return DecisionTree(feature, threshold, left, right, value)


def random_constraints(rng, d: int, n: int) -> list:
    from fcgprobe.models import Constraint

    out = []
    for _ in range(n):
        lo, hi = sorted(np.round(rng.uniform(-1, 1, 2), 1))
        if lo == hi:
            hi += 0.1
        out.append(Constraint(int(rng.integers(0, d)), lo if rng.random() < 0.8 else -math.inf,
                              hi if rng.random() < 0.8 else math.inf,
                              bool(rng.random() < 0.5), bool(rng.random() < 0.5)))
    return out


def benign_path_sound(tree, paths, rng, d: int, tries: int = 5) -> bool:
    """Points inside every constraint of a benign path must be classified benign."""
    from fcgprobe.models import BENIGN

    for path in paths:
        for _ in range(tries):
            x = rng.uniform(-1.5, 1.5, d)
            for c in path:
                lo = c.lower if math.isfinite(c.lower) else c.upper - 1
                hi = c.upper if math.isfinite(c.upper) else c.lower + 1
                x[c.feature] = hi if rng.random() < 0.3 else (lo + hi) / 2
            if all(in_interval(x[c.feature], c) for c in path) and tree.predict_one(x) != BENIGN:
                return False
    return True
