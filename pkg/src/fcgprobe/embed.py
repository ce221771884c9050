"""Graph embeddings: centrality features over sensitive APIs and Markov transitions.

Centrality vectors are indexed by :class:`SensitiveApiIndex`; position ``i``
holds the centrality of the system node labelled ``apis[i]`` or 0.0 if that
API is absent. Path-based measures use inbound shortest paths (``u ~> v``).
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import AlphaTooLarge, DegenerateGraph, NonConvergent, ParseError
from .graph import FunctionCallGraph, NodeKind, SensitiveApiIndex

DEFAULT_ALPHA = 0.005


class Scheme(str, enum.Enum):
    DEGREE = "degree"
    KATZ = "katz"
    HARMONIC = "harmonic"
    CLOSENESS = "closeness"
    AVERAGE = "average"
    CONCENTRATE = "concentrate"
    MAMA_FAMILY = "mama_family"
    APIGRAPH_CLUSTER = "apigraph_cluster"

    @property
    def is_markov(self) -> bool:
        return self in (Scheme.MAMA_FAMILY, Scheme.APIGRAPH_CLUSTER)


def _targets(g, apis, nodes):
    return apis.locate(g) if nodes is None else nodes


def degree_centrality(g: FunctionCallGraph, apis: SensitiveApiIndex, nodes=None) -> np.ndarray:
    n = g.n_nodes
    if n < 2:
        raise DegenerateGraph("degree centrality needs at least two nodes")
    out = np.zeros(len(apis))
    for i, v in enumerate(_targets(g, apis, nodes)):
        if v is not None:
            out[i] = (len(g.succ[v]) + len(g.pred[v])) / (n - 1)
    return out


def _adjacency(g: FunctionCallGraph):
    order = list(g.kinds)
    index = {n: i for i, n in enumerate(order)}
    rows, cols = [], []
    for u, vs in g.succ.items():
        iu = index[u]
        for v in vs:
            rows.append(iu)
            cols.append(index[v])
    n = len(order)
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return a, index


def spectral_radius_bound(a, n_iter: int = 60) -> float:
    """Estimate rho(A) of a non-negative matrix as ||A^k 1||^(1/k).

    Overestimates for finite ``k``, which is the safe direction for the
    Katz convergence check.
    """
    n = a.shape[0]
    if n == 0 or a.nnz == 0:
        return 0.0
    y = np.ones(n)
    log_norm = 0.0
    for _ in range(n_iter):
        y = a @ y
        s = y.sum()
        if s == 0.0:
            return 0.0
        log_norm += math.log(s)
        y /= s
    return math.exp(log_norm / n_iter)


def katz_centrality(
    g: FunctionCallGraph,
    apis: SensitiveApiIndex,
    alpha: float = DEFAULT_ALPHA,
    tol: float = 1e-9,
    max_iter: int = 1000,
    nodes=None,
) -> np.ndarray:
    """Iterate x <- alpha * A^T (x + 1) to its fixed point."""
    targets = _targets(g, apis, nodes)
    out = np.zeros(len(apis))
    if g.n_edges == 0:
        return out
    a, index = _adjacency(g)
    rho = spectral_radius_bound(a)
    if not 0.0 < alpha or alpha * rho >= 0.9:
        raise AlphaTooLarge(f"alpha={alpha} with spectral radius ~{rho:.4g}")
    at = a.T.tocsr()
    x = np.zeros(a.shape[0])
    for _ in range(max_iter):
        nxt = alpha * (at @ (x + 1.0))
        if np.max(np.abs(nxt - x)) < tol:
            x = nxt
            break
        x = nxt
    else:
        raise NonConvergent(f"Katz iteration did not converge in {max_iter} steps")
    for i, v in enumerate(targets):
        if v is not None:
            out[i] = x[index[v]]
    return out


def inbound_distances(g: FunctionCallGraph, v: int) -> dict[int, int]:
    """BFS over predecessors: d(u, v) for every u that can reach v."""
    dist = {v: 0}
    queue = deque([v])
    while queue:
        w = queue.popleft()
        d = dist[w] + 1
        for u in g.pred[w]:
            if u not in dist:
                dist[u] = d
                queue.append(u)
    return dist


def harmonic_centrality(g: FunctionCallGraph, apis: SensitiveApiIndex, nodes=None) -> np.ndarray:
    out = np.zeros(len(apis))
    for i, v in enumerate(_targets(g, apis, nodes)):
        if v is None:
            continue
        dist = inbound_distances(g, v)
        out[i] = math.fsum(1.0 / d for d in dist.values() if d > 0)
    return out


def closeness_centrality(g: FunctionCallGraph, apis: SensitiveApiIndex, nodes=None) -> np.ndarray:
    n = g.n_nodes
    if n < 2:
        raise DegenerateGraph("closeness centrality needs at least two nodes")
    out = np.zeros(len(apis))
    for i, v in enumerate(_targets(g, apis, nodes)):
        if v is None:
            continue
        dist = inbound_distances(g, v)
        total = sum(dist.values())
        if total > 0:
            reach = len(dist)
            out[i] = (reach - 1) ** 2 / (total * (n - 1))
    return out


def _four(g, apis, alpha, nodes):
    nodes = _targets(g, apis, nodes)
    return (
        degree_centrality(g, apis, nodes),
        katz_centrality(g, apis, alpha, nodes=nodes),
        harmonic_centrality(g, apis, nodes),
        closeness_centrality(g, apis, nodes),
    )


def average_centrality(g, apis, alpha: float = DEFAULT_ALPHA, nodes=None) -> np.ndarray:
    d, k, h, c = _four(g, apis, alpha, nodes)
    return (d + k + h + c) / 4.0


def concentrate_centrality(g, apis, alpha: float = DEFAULT_ALPHA, nodes=None) -> np.ndarray:
    return np.concatenate(_four(g, apis, alpha, nodes))


# -- Markov-chain abstraction ----------------------------------------------

@dataclass
class AbstractionMap:
    """Longest-prefix mapping from function labels to abstract states.

    Labels that match no prefix (and all synthetic nodes) fall into the
    reserved self-defined state, numbered one past the largest mapped id.
    """

    prefixes: dict[str, int]
    _cache: dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._ordered = sorted(self.prefixes.items(), key=lambda kv: -len(kv[0]))

    @property
    def self_defined(self) -> int:
        return max(self.prefixes.values(), default=-1) + 1

    @property
    def state_count(self) -> int:
        return self.self_defined + 1

    def state(self, label: str) -> int:
        s = self._cache.get(label)
        if s is None:
            s = self.self_defined
            for prefix, state in self._ordered:
                if label.startswith(prefix):
                    s = state
                    break
            self._cache[label] = s
        return s

    @classmethod
    def from_lines(cls, lines) -> "AbstractionMap":
        prefixes = {}
        for lineno, line in enumerate(lines, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            try:
                prefix, state = line.split("\t")
                prefixes[prefix] = int(state)
            except ValueError:
                raise ParseError(f"line {lineno}: expected 'prefix<TAB>state_id'") from None
        return cls(prefixes)

    @classmethod
    def read(cls, path) -> "AbstractionMap":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)


def markov_embedding(g: FunctionCallGraph, abstraction: AbstractionMap) -> np.ndarray:
    s = abstraction.state_count
    selfdef = abstraction.self_defined
    state = {}
    for n, k in g.kinds.items():
        if k is NodeKind.SYNTHETIC:
            state[n] = selfdef
        else:
            state[n] = abstraction.state(g.label(n))
    counts = np.zeros((s, s))
    for u, vs in g.succ.items():
        su = state[u]
        for v in vs:
            counts[su, state[v]] += 1.0
    rows = counts.sum(axis=1, keepdims=True)
    probs = np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)
    return probs.ravel()


# -- dispatch ---------------------------------------------------------------

@dataclass
class Embedder:
    """Callable bundling a scheme with the inputs it needs."""

    scheme: Scheme
    apis: SensitiveApiIndex | None = None
    abstraction: AbstractionMap | None = None
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        if self.scheme.is_markov and self.abstraction is None:
            raise ValueError(f"{self.scheme.value} needs an abstraction map")
        if not self.scheme.is_markov and self.apis is None:
            raise ValueError(f"{self.scheme.value} needs a sensitive API list")

    @property
    def dim(self) -> int:
        if self.scheme.is_markov:
            return self.abstraction.state_count ** 2
        if self.scheme is Scheme.CONCENTRATE:
            return 4 * len(self.apis)
        return len(self.apis)

    def __call__(self, g: FunctionCallGraph, nodes: Sequence[int | None] | None = None) -> np.ndarray:
        sc = self.scheme
        if sc.is_markov:
            return markov_embedding(g, self.abstraction)
        if sc is Scheme.DEGREE:
            return degree_centrality(g, self.apis, nodes)
        if sc is Scheme.KATZ:
            return katz_centrality(g, self.apis, self.alpha, nodes=nodes)
        if sc is Scheme.HARMONIC:
            return harmonic_centrality(g, self.apis, nodes)
        if sc is Scheme.CLOSENESS:
            return closeness_centrality(g, self.apis, nodes)
        if sc is Scheme.AVERAGE:
            return average_centrality(g, self.apis, self.alpha, nodes)
        return concentrate_centrality(g, self.apis, self.alpha, nodes)

    def locate(self, g: FunctionCallGraph):
        """API node positions; stable under perturbation since system nodes never change."""
        return None if self.scheme.is_markov else self.apis.locate(g)
