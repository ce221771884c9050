"""The seven call-graph perturbation operators.

Each operator is a small frozen record. :func:`apply_op` validates the whole
operator against the current graph before touching it, so a rejected
operator never leaves a partial edit behind.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import FcgError, NoValidOp
from .graph import CriticalArea, Edge, FunctionCallGraph, NodeKind


class OpKind(str, enum.Enum):
    ADD_NODE = "AddNode"
    ADD_EDGE = "AddEdge"
    REWIRE = "Rewire"
    REMOVE_NODE = "RemoveNode"
    ADD_SPARSE_NODES = "AddSparseNodes"
    ADD_DENSE_NODES = "AddDenseNodes"
    ADD_LONG_EDGES = "AddLongEdges"


@dataclass(frozen=True)
class AddNode:
    caller: int
    new_id: int
    kind = OpKind.ADD_NODE

    @property
    def new_ids(self) -> tuple[int, ...]:
        return (self.new_id,)


@dataclass(frozen=True)
class AddEdge:
    caller: int
    callee: int
    kind = OpKind.ADD_EDGE
    new_ids = ()


@dataclass(frozen=True)
class Rewire:
    caller: int
    callee: int
    mid: int
    kind = OpKind.REWIRE
    new_ids = ()


@dataclass(frozen=True)
class RemoveNode:
    target: int
    kind = OpKind.REMOVE_NODE
    new_ids = ()


@dataclass(frozen=True)
class AddSparseNodes:
    anchor: int
    new_ids: tuple[int, ...]
    kind = OpKind.ADD_SPARSE_NODES


@dataclass(frozen=True)
class AddDenseNodes:
    anchor: int
    new_ids: tuple[int, ...]
    kind = OpKind.ADD_DENSE_NODES


@dataclass(frozen=True)
class AddLongEdges:
    source: int
    target: int
    chains: tuple[tuple[int, ...], ...]
    kind = OpKind.ADD_LONG_EDGES

    @property
    def new_ids(self) -> tuple[int, ...]:
        return tuple(n for chain in self.chains for n in chain)


Op = AddNode | AddEdge | Rewire | RemoveNode | AddSparseNodes | AddDenseNodes | AddLongEdges
OP_TYPES = {t.kind: t for t in (AddNode, AddEdge, Rewire, RemoveNode, AddSparseNodes, AddDenseNodes, AddLongEdges)}


class ErrorKind(str, enum.Enum):
    MISSING_NODE = "MissingNode"
    MISSING_EDGE = "MissingEdge"
    DUPLICATE_EDGE = "DuplicateEdge"
    DUPLICATE_NODE = "DuplicateNode"
    KIND_VIOLATION = "KindViolation"


class ValidityError(FcgError):
    def __init__(self, kind: ErrorKind, element, detail: str = ""):
        self.kind = kind
        self.element = element
        super().__init__(f"{kind.value}: {element!r}" + (f" ({detail})" if detail else ""))


class SequenceError(FcgError):
    def __init__(self, index: int, error: ValidityError):
        self.index = index
        self.error = error
        super().__init__(f"op {index} failed: {error}")


# -- validation and application ---------------------------------------------

def _need_node(g, n):
    if n not in g.kinds:
        raise ValidityError(ErrorKind.MISSING_NODE, n)


def _need_user(g, n, role):
    _need_node(g, n)
    if g.kinds[n] is NodeKind.SYSTEM:
        raise ValidityError(ErrorKind.KIND_VIOLATION, n, f"{role} must be a user node")


def _need_fresh(g, ids):
    if len(set(ids)) != len(ids):
        raise ValidityError(ErrorKind.DUPLICATE_NODE, ids, "repeated new id")
    for n in ids:
        if n in g.kinds:
            raise ValidityError(ErrorKind.DUPLICATE_NODE, n)


def _need_absent(g, u, v):
    if u == v:
        raise ValidityError(ErrorKind.KIND_VIOLATION, (u, v), "self-loop")
    if v in g.succ[u]:
        raise ValidityError(ErrorKind.DUPLICATE_EDGE, (u, v))


def check_op(g: FunctionCallGraph, op: Op) -> None:
    """Raise :class:`ValidityError` if ``op`` cannot be applied to ``g``."""
    k = op.kind
    if k is OpKind.ADD_NODE:
        _need_user(g, op.caller, "caller")
        _need_fresh(g, op.new_ids)
    elif k is OpKind.ADD_EDGE:
        _need_user(g, op.caller, "caller")
        _need_node(g, op.callee)
        _need_absent(g, op.caller, op.callee)
    elif k is OpKind.REWIRE:
        a, d, h = op.caller, op.callee, op.mid
        if not g.has_edge(a, d):
            raise ValidityError(ErrorKind.MISSING_EDGE, (a, d))
        _need_user(g, h, "mid")
        if h == a or h == d:
            raise ValidityError(ErrorKind.KIND_VIOLATION, h, "mid must differ from both endpoints")
        _need_absent(g, a, h)
        _need_absent(g, h, d)
    elif k is OpKind.REMOVE_NODE:
        d = op.target
        _need_user(g, d, "target")
        if not g.pred[d]:
            # no caller to inline into: any API whose only call site is d would vanish
            for c in g.succ[d]:
                if g.kinds[c] is NodeKind.SYSTEM and len(g.pred[c]) == 1:
                    raise ValidityError(ErrorKind.KIND_VIOLATION, d, f"removal orphans API node {c}")
    elif k is OpKind.ADD_SPARSE_NODES or k is OpKind.ADD_DENSE_NODES:
        _need_user(g, op.anchor, "anchor")
        if not op.new_ids:
            raise ValidityError(ErrorKind.KIND_VIOLATION, op.new_ids, "k must be >= 1")
        _need_fresh(g, op.new_ids)
    elif k is OpKind.ADD_LONG_EDGES:
        _need_user(g, op.source, "source")
        _need_node(g, op.target)
        if g.kinds[op.target] is not NodeKind.SYSTEM:
            raise ValidityError(ErrorKind.KIND_VIOLATION, op.target, "long-edge target must be a system node")
        if not op.chains or any(len(c) != len(op.chains[0]) or not c for c in op.chains):
            raise ValidityError(ErrorKind.KIND_VIOLATION, op.chains, "chains must share a length k >= 1")
        _need_fresh(g, op.new_ids)
    else:  # pragma: no cover
        raise TypeError(f"not an operator: {op!r}")


def _new(g, n):
    g.kinds[n] = NodeKind.SYNTHETIC
    g.succ[n] = set()
    g.pred[n] = set()
    g._owned.add(n)
    if n >= g.next_id:
        g.next_id = n + 1


def _apply_unchecked(g: FunctionCallGraph, op: Op) -> None:
    k = op.kind
    if k is OpKind.ADD_NODE:
        _new(g, op.new_id)
        g._link(op.caller, op.new_id)
    elif k is OpKind.ADD_EDGE:
        g._link(op.caller, op.callee)
    elif k is OpKind.REWIRE:
        g._unlink(op.caller, op.callee)
        g._link(op.caller, op.mid)
        g._link(op.mid, op.callee)
    elif k is OpKind.REMOVE_NODE:
        d = op.target
        callers = [h for h in g.pred[d] if g.kinds[h] is not NodeKind.SYSTEM]
        callees = list(g.succ[d])
        g._drop_node(d)
        for h in callers:
            succ_h = g.succ[h]
            for c in callees:
                if c != h and c not in succ_h:
                    g._link(h, c)
                    succ_h = g.succ[h]
    elif k is OpKind.ADD_SPARSE_NODES or k is OpKind.ADD_DENSE_NODES:
        # bulk path: the new nodes are private to this graph, so their sets are built directly
        ids = op.new_ids
        a = op.anchor
        g._own(a)
        dense = k is OpKind.ADD_DENSE_NODES
        syn = NodeKind.SYNTHETIC
        for i, v in enumerate(ids):
            g.kinds[v] = syn
            g.succ[v] = set(ids[i + 1:]) if dense else set()
            g.pred[v] = {a, *ids[:i]} if dense else {a}
        g._owned.update(ids)
        g.succ[a].update(ids)
        n = len(ids)
        g.n_edges += n + (n * (n - 1) // 2 if dense else 0)
        g.next_id = max(g.next_id, max(ids) + 1)
    elif k is OpKind.ADD_LONG_EDGES:
        src, dst = op.source, op.target
        g._own(src)
        g._own(dst)
        syn = NodeKind.SYNTHETIC
        for chain in op.chains:
            path = (src, *chain, dst)
            for i, v in enumerate(chain, 1):
                g.kinds[v] = syn
                g.succ[v] = {path[i + 1]}
                g.pred[v] = {path[i - 1]}
            g._owned.update(chain)
            g.succ[src].add(chain[0])
            g.pred[dst].add(chain[-1])
            g.n_edges += len(chain) + 1
        g.next_id = max(g.next_id, max(op.new_ids) + 1)


def apply_op(g: FunctionCallGraph, op: Op, inplace: bool = False) -> FunctionCallGraph:
    """Return the graph after ``op``; ``g`` is only modified when ``inplace``."""
    check_op(g, op)
    out = g if inplace else g.copy()
    _apply_unchecked(out, op)
    return out


def apply_sequence(g: FunctionCallGraph, ops: Iterable[Op]) -> FunctionCallGraph:
    """Left fold of :func:`apply_op`; raises :class:`SequenceError` on the first failure.

    Works on a copy, so the input graph is untouched either way.
    """
    out = g.copy()
    for i, op in enumerate(ops):
        try:
            check_op(out, op)
        except ValidityError as exc:
            raise SequenceError(i, exc) from None
        _apply_unchecked(out, op)
    return out


# -- use-def analysis ---------------------------------------------------------

@dataclass(frozen=True)
class UseDefSet:
    """Elements are node ids (int) or edges (tuple pairs)."""

    defines: frozenset = frozenset()
    uses: frozenset = frozenset()
    kills: frozenset = frozenset()

    @property
    def defkill(self) -> frozenset:
        return self.defines | self.kills

    @staticmethod
    def nodes(elems) -> set[int]:
        return {e for e in elems if not isinstance(e, tuple)}

    @staticmethod
    def edges(elems) -> set[Edge]:
        return {e for e in elems if isinstance(e, tuple)}


def _fan_edges(anchor, ids):
    return [(anchor, v) for v in ids]


def use_def(op: Op, g: FunctionCallGraph | None = None) -> UseDefSet:
    """Elements an operator creates, requires and removes.

    Without ``g`` a RemoveNode is described at node granularity only; given
    the pre-state graph its incident edges and bridging edges are resolved.
    """
    k = op.kind
    if k is OpKind.ADD_NODE:
        return UseDefSet(frozenset([op.new_id, (op.caller, op.new_id)]), frozenset([op.caller]))
    if k is OpKind.ADD_EDGE:
        return UseDefSet(frozenset([(op.caller, op.callee)]), frozenset([op.caller, op.callee]))
    if k is OpKind.REWIRE:
        a, d, h = op.caller, op.callee, op.mid
        return UseDefSet(frozenset([(a, h), (h, d)]), frozenset([a, d, h, (a, d)]), frozenset([(a, d)]))
    if k is OpKind.REMOVE_NODE:
        d = op.target
        if g is None or d not in g.kinds:
            return UseDefSet(frozenset(), frozenset([d]), frozenset([d]))
        incident = [(h, d) for h in g.pred[d]] + [(d, c) for c in g.succ[d]]
        bridges = [
            (h, c) for h in g.pred[d] for c in g.succ[d]
            if h != c and c not in g.succ[h]
        ]
        # incident edges die with d; only d itself is required, so ops that
        # merely created edges at d stay independent of the removal
        return UseDefSet(frozenset(bridges), frozenset([d]), frozenset([d, *incident]))
    if k is OpKind.ADD_SPARSE_NODES or k is OpKind.ADD_DENSE_NODES:
        ids = op.new_ids
        defs = [*ids, *_fan_edges(op.anchor, ids)]
        if k is OpKind.ADD_DENSE_NODES:
            defs += [(vi, vj) for i, vi in enumerate(ids) for vj in ids[i + 1:]]
        return UseDefSet(frozenset(defs), frozenset([op.anchor]))
    if k is OpKind.ADD_LONG_EDGES:
        defs = []
        for chain in op.chains:
            path = [op.source, *chain, op.target]
            defs += chain
            defs += list(zip(path, path[1:]))
        return UseDefSet(frozenset(defs), frozenset([op.source, op.target]))
    raise TypeError(f"not an operator: {op!r}")  # pragma: no cover


def depends(earlier: UseDefSet, later: UseDefSet) -> bool:
    return not later.uses.isdisjoint(earlier.defines) or not later.uses.isdisjoint(earlier.kills)


def has_dependency(earlier: Op, later: Op) -> bool:
    return depends(use_def(earlier), use_def(later))


# -- remapping synthetic ids --------------------------------------------------

def remap_op(op: Op, mapping: dict[int, int]) -> Op:
    """Rename node ids through ``mapping`` (ids not in it are kept)."""
    if not mapping:
        return op
    m = lambda n: mapping.get(n, n)  # noqa: E731
    k = op.kind
    if k is OpKind.ADD_NODE:
        return AddNode(m(op.caller), m(op.new_id))
    if k is OpKind.ADD_EDGE:
        return AddEdge(m(op.caller), m(op.callee))
    if k is OpKind.REWIRE:
        return Rewire(m(op.caller), m(op.callee), m(op.mid))
    if k is OpKind.REMOVE_NODE:
        return RemoveNode(m(op.target))
    if k is OpKind.ADD_SPARSE_NODES:
        return AddSparseNodes(m(op.anchor), tuple(map(m, op.new_ids)))
    if k is OpKind.ADD_DENSE_NODES:
        return AddDenseNodes(m(op.anchor), tuple(map(m, op.new_ids)))
    return AddLongEdges(m(op.source), m(op.target), tuple(tuple(map(m, c)) for c in op.chains))


def op_nodes(op: Op) -> tuple[int, ...]:
    """Every node id an operator mentions."""
    k = op.kind
    if k is OpKind.ADD_NODE:
        return (op.caller, op.new_id)
    if k is OpKind.ADD_EDGE:
        return (op.caller, op.callee)
    if k is OpKind.REWIRE:
        return (op.caller, op.callee, op.mid)
    if k is OpKind.REMOVE_NODE:
        return (op.target,)
    if k is OpKind.ADD_LONG_EDGES:
        return (op.source, op.target, *op.new_ids)
    return (op.anchor, *op.new_ids)


# -- serialization ------------------------------------------------------------

def op_to_dict(op: Op) -> dict:
    k = op.kind
    d = {"op": k.value}
    if k is OpKind.ADD_NODE:
        d.update(caller=op.caller, new_id=op.new_id)
    elif k is OpKind.ADD_EDGE:
        d.update(caller=op.caller, callee=op.callee)
    elif k is OpKind.REWIRE:
        d.update(caller=op.caller, callee=op.callee, mid=op.mid)
    elif k is OpKind.REMOVE_NODE:
        d.update(target=op.target)
    elif k is OpKind.ADD_LONG_EDGES:
        d.update(source=op.source, target=op.target, chains=[list(c) for c in op.chains])
    else:
        d.update(anchor=op.anchor, new_ids=list(op.new_ids))
    return d


def op_from_dict(d: dict) -> Op:
    k = OpKind(d["op"])
    if k is OpKind.ADD_NODE:
        return AddNode(int(d["caller"]), int(d["new_id"]))
    if k is OpKind.ADD_EDGE:
        return AddEdge(int(d["caller"]), int(d["callee"]))
    if k is OpKind.REWIRE:
        return Rewire(int(d["caller"]), int(d["callee"]), int(d["mid"]))
    if k is OpKind.REMOVE_NODE:
        return RemoveNode(int(d["target"]))
    if k is OpKind.ADD_LONG_EDGES:
        return AddLongEdges(int(d["source"]), int(d["target"]), tuple(tuple(map(int, c)) for c in d["chains"]))
    return OP_TYPES[k](int(d["anchor"]), tuple(map(int, d["new_ids"])))


# -- random generation ----------------------------------------------------------

@dataclass
class OpWeights:
    """Sampling weights and parameter ranges for random operators."""

    weights: dict[OpKind, float] = field(default_factory=lambda: {k: 1.0 for k in OpKind})
    sparse_k: tuple[int, int] = (2, 16)
    dense_k: tuple[int, int] = (2, 16)
    long_m: tuple[int, int] = (1, 4)
    long_k: tuple[int, int] = (2, 8)
    # chance of drawing a user-role node from previously synthesized nodes
    synthetic_bias: float = 0.3
    # chance that an AddEdge callee is a sensitive API rather than any node
    system_callee_prob: float = 0.5
    max_tries: int = 64

    def __post_init__(self):
        self.weights = {OpKind(k): float(v) for k, v in self.weights.items()}
        if not any(v > 0 for v in self.weights.values()):
            raise ValueError("at least one operator weight must be positive")

    def to_dict(self) -> dict:
        return {
            "weights": {k.value: v for k, v in self.weights.items()},
            "sparse_k": list(self.sparse_k), "dense_k": list(self.dense_k),
            "long_m": list(self.long_m), "long_k": list(self.long_k),
            "synthetic_bias": self.synthetic_bias,
            "system_callee_prob": self.system_callee_prob,
            "max_tries": self.max_tries,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OpWeights":
        d = dict(d)
        for key in ("sparse_k", "dense_k", "long_m", "long_k"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


class OpSampler:
    """Draws operators valid against an evolving graph, inside a critical area.

    User-role nodes come from the area's user nodes still present in the
    graph, or (with ``synthetic_bias``) from synthetic nodes created along
    the way. Callers must report every applied operator via :meth:`applied`
    so freshly created nodes join the pool.
    """

    def __init__(self, g: FunctionCallGraph, area: CriticalArea, weights: OpWeights, rng: random.Random,
                 next_id: int | None = None):
        self.g = g
        self.w = weights
        self.rng = rng
        self.area_users = sorted(n for n in area.node_ids if g.is_user(n))
        self.anchors = sorted(n for n in area.anchor_apis if n in g.kinds)
        self.synthetic = sorted(n for n in g.kinds if g.kinds[n] is NodeKind.SYNTHETIC)
        self.next_id = max(g.next_id, next_id or 0)
        kinds = [k for k in OpKind if self.w.weights.get(k, 0.0) > 0]
        self.kinds = kinds
        self.kind_weights = [self.w.weights[k] for k in kinds]

    # node pickers return None when nothing suitable is present
    def _pick_from(self, pool):
        g = self.g
        for _ in range(8):
            if not pool:
                return None
            n = pool[self.rng.randrange(len(pool))]
            if n in g.kinds:
                return n
        live = [n for n in pool if n in g.kinds]
        pool[:] = live
        return self.rng.choice(live) if live else None

    def pick_user(self):
        if self.synthetic and self.rng.random() < self.w.synthetic_bias:
            n = self._pick_from(self.synthetic)
            if n is not None:
                return n
        n = self._pick_from(self.area_users)
        if n is None and self.synthetic:
            n = self._pick_from(self.synthetic)
        return n

    def pick_system(self):
        return self._pick_from(self.anchors)

    def pick_any(self):
        if self.anchors and self.rng.random() < self.w.system_callee_prob:
            return self.pick_system()
        return self.pick_user()

    def fresh(self, k: int) -> tuple[int, ...]:
        ids = tuple(range(self.next_id, self.next_id + k))
        return ids

    def _propose(self, kind: OpKind):
        rng, w = self.rng, self.w
        if kind is OpKind.ADD_NODE:
            a = self.pick_user()
            return None if a is None else AddNode(a, self.fresh(1)[0])
        if kind is OpKind.ADD_EDGE:
            i, f = self.pick_user(), self.pick_any()
            return None if i is None or f is None else AddEdge(i, f)
        if kind is OpKind.REWIRE:
            a = self.pick_user()
            if a is None or not self.g.succ[a]:
                return None
            d = rng.choice(sorted(self.g.succ[a]))
            h = self.pick_user()
            return None if h is None else Rewire(a, d, h)
        if kind is OpKind.REMOVE_NODE:
            d = self.pick_user()
            return None if d is None else RemoveNode(d)
        if kind is OpKind.ADD_SPARSE_NODES:
            a = self.pick_user()
            return None if a is None else AddSparseNodes(a, self.fresh(rng.randint(*w.sparse_k)))
        if kind is OpKind.ADD_DENSE_NODES:
            a = self.pick_user()
            return None if a is None else AddDenseNodes(a, self.fresh(rng.randint(*w.dense_k)))
        a, f = self.pick_user(), self.pick_system()
        if a is None or f is None:
            return None
        m, k = rng.randint(*w.long_m), rng.randint(*w.long_k)
        ids = self.fresh(m * k)
        return AddLongEdges(a, f, tuple(ids[j * k:(j + 1) * k] for j in range(m)))

    def draw(self, kind: OpKind | None = None) -> Op:
        if not self.area_users and not self.synthetic:
            raise NoValidOp("critical area has no user nodes")
        for _ in range(self.w.max_tries):
            k = kind or self.rng.choices(self.kinds, self.kind_weights)[0]
            op = self._propose(k)
            if op is None:
                continue
            try:
                check_op(self.g, op)
            except ValidityError:
                continue
            return op
        raise NoValidOp(f"no valid operator after {self.w.max_tries} attempts")

    def applied(self, op: Op) -> None:
        if op.new_ids:
            self.synthetic.extend(op.new_ids)
            self.next_id = max(self.next_id, max(op.new_ids) + 1)

    def retarget(self, op: Op, tries: int = 8) -> Op | None:
        """A same-variant operator with its node references re-drawn, or None.

        The first attempt only replaces references that are missing or of
        the wrong kind; later attempts redraw every reference. New ids are
        always re-allocated if any of them is taken.
        """
        g = self.g
        ids_taken = any(n in g.kinds for n in op.new_ids)

        def user_ok(n):
            return g.is_user(n)

        for attempt in range(tries):
            keep = attempt == 0

            def u(n):
                return n if keep and user_ok(n) else self.pick_user()

            k = op.kind
            if k is OpKind.ADD_NODE:
                cand = AddNode(u(op.caller), self.fresh(1)[0] if ids_taken else op.new_id)
            elif k is OpKind.ADD_EDGE:
                callee = op.callee if keep and op.callee in g.kinds and not g.has_edge(op.caller, op.callee) else self.pick_any()
                cand = AddEdge(u(op.caller), callee)
            elif k is OpKind.REWIRE:
                if keep and g.has_edge(op.caller, op.callee):
                    a, d = op.caller, op.callee
                else:
                    a = self.pick_user()
                    if a is None or not g.succ[a]:
                        continue
                    d = self.rng.choice(sorted(g.succ[a]))
                cand = Rewire(a, d, self.pick_user() if attempt else op.mid)
            elif k is OpKind.REMOVE_NODE:
                cand = RemoveNode(self.pick_user() if attempt or not user_ok(op.target) else op.target)
            elif k is OpKind.ADD_SPARSE_NODES or k is OpKind.ADD_DENSE_NODES:
                ids = self.fresh(len(op.new_ids)) if ids_taken else op.new_ids
                cand = type(op)(u(op.anchor), ids)
            else:
                target = op.target if keep and g.is_system(op.target) else self.pick_system()
                if ids_taken:
                    m, kk = len(op.chains), len(op.chains[0])
                    ids = self.fresh(m * kk)
                    chains = tuple(ids[j * kk:(j + 1) * kk] for j in range(m))
                else:
                    chains = op.chains
                cand = AddLongEdges(u(op.source), target, chains)
            if any(n is None for n in op_nodes(cand)):
                continue
            try:
                check_op(g, cand)
            except ValidityError:
                continue
            return cand
        return None


def random_op(g_state: FunctionCallGraph, area: CriticalArea, weights: OpWeights | None = None,
              rng: random.Random | None = None) -> Op:
    """One operator valid against ``g_state`` with targets drawn from ``area``."""
    if not area:
        raise NoValidOp("empty critical area")
    sampler = OpSampler(g_state, area, weights or OpWeights(), rng or random.Random(0))
    return sampler.draw()


# -- code-level translation script ---------------------------------------------

SCRIPT_HEADER = "# call-graph perturbation script v1"


def _fmt(directive: str, index: int, **params) -> str:
    fields = "\t".join(f"{k}={v}" for k, v in params.items())
    return f"{directive}\top={index}\t{fields}"


def directive_count(op: Op) -> int:
    """Lines emitted for ``op`` (see docs/script_format.md)."""
    k = op.kind
    if k is OpKind.ADD_NODE or k is OpKind.ADD_EDGE or k is OpKind.REMOVE_NODE:
        return 2
    if k is OpKind.REWIRE:
        return 3
    n = len(op.new_ids)
    if k is OpKind.ADD_SPARSE_NODES:
        return 2 * n
    if k is OpKind.ADD_DENSE_NODES:
        return 2 * n + (n - 1) + n * (n - 1) // 2
    m, kk = len(op.chains), len(op.chains[0])
    return m * (2 * kk + 1)


def translate_to_script(ops: Sequence[Op], labels: dict[int, str] | None = None) -> str:
    """Ordered code-transformation directives, one block per operator."""
    labels = labels or {}
    name = lambda n: labels.get(n, f"F{n}")  # noqa: E731
    lines = [SCRIPT_HEADER, f"# operators: {len(ops)}"]
    for i, op in enumerate(ops):
        k = op.kind
        if k is OpKind.ADD_NODE:
            lines.append(_fmt("CREATE_FUNCTION", i, function=name(op.new_id), body="noop_arith"))
            lines.append(_fmt("INSERT_CALL", i, caller=name(op.caller), callee=name(op.new_id), result="discard"))
        elif k is OpKind.ADD_EDGE:
            lines.append(_fmt("ADD_CONDITION_PARAM", i, function=name(op.callee)))
            lines.append(_fmt("INSERT_GUARDED_CALL", i, caller=name(op.caller), callee=name(op.callee), condition="true"))
        elif k is OpKind.REWIRE:
            lines.append(_fmt("ADD_CONDITION_PARAM", i, function=name(op.mid)))
            lines.append(_fmt("REPLACE_CALL", i, caller=name(op.caller), old=name(op.callee), new=name(op.mid)))
            lines.append(_fmt("INSERT_GUARDED_CALL", i, caller=name(op.mid), callee=name(op.callee), condition="relay"))
        elif k is OpKind.REMOVE_NODE:
            lines.append(_fmt("INLINE_FUNCTION", i, function=name(op.target), into="all_callers"))
            lines.append(_fmt("DELETE_FUNCTION", i, function=name(op.target)))
        elif k is OpKind.ADD_SPARSE_NODES or k is OpKind.ADD_DENSE_NODES:
            for v in op.new_ids:
                lines.append(_fmt("CREATE_FUNCTION", i, function=name(v), body="noop_arith"))
                lines.append(_fmt("INSERT_CALL", i, caller=name(op.anchor), callee=name(v), result="discard"))
            if k is OpKind.ADD_DENSE_NODES:
                ids = op.new_ids
                for v in ids[1:]:
                    lines.append(_fmt("ADD_CONDITION_PARAM", i, function=name(v)))
                for a, vi in enumerate(ids):
                    for vj in ids[a + 1:]:
                        lines.append(_fmt("INSERT_GUARDED_CALL", i, caller=name(vi), callee=name(vj), condition="true"))
        else:
            for chain in op.chains:
                for v in chain:
                    lines.append(_fmt("CREATE_FUNCTION", i, function=name(v), body="proxy"))
                path = [op.source, *chain, op.target]
                for a, b in zip(path, path[1:]):
                    lines.append(_fmt("INSERT_CALL", i, caller=name(a), callee=name(b), result="forward"))
    return "\n".join(lines) + "\n"
