"""Function call graph model, (de)serialization and critical-area search.

Graphs are stored as successor/predecessor adjacency sets keyed by integer
node ids. ``copy()`` is copy-on-write: adjacency sets are shared with the
source until a node is first mutated, which keeps replaying long operator
sequences over a large base graph cheap.
"""
from __future__ import annotations

import enum
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

Edge = tuple[int, int]


class NodeKind(str, enum.Enum):
    SYSTEM = "system"
    USER = "user"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class NodeRecord:
    id: int
    kind: NodeKind
    label: str

    @property
    def synthesized(self) -> bool:
        return self.kind is NodeKind.SYNTHETIC


class FunctionCallGraph:
    __slots__ = ("kinds", "labels", "succ", "pred", "next_id", "n_edges", "_owned")

    def __init__(self):
        self.kinds: dict[int, NodeKind] = {}
        self.labels: dict[int, str] = {}
        self.succ: dict[int, set[int]] = {}
        self.pred: dict[int, set[int]] = {}
        self.next_id = 0
        self.n_edges = 0
        self._owned: set[int] = set()

    # -- construction -----------------------------------------------------
    def add_node(self, kind: NodeKind, label: str | None = None, node_id: int | None = None) -> int:
        if node_id is None:
            node_id = self.next_id
        if node_id in self.kinds:
            raise ValidationError(f"duplicate node id {node_id}")
        self.kinds[node_id] = kind
        if label is not None:
            self.labels[node_id] = label
        self.succ[node_id] = set()
        self.pred[node_id] = set()
        self._owned.add(node_id)
        if node_id >= self.next_id:
            self.next_id = node_id + 1
        return node_id

    def add_edge(self, u: int, v: int) -> None:
        """Insert a call edge, enforcing the graph invariants."""
        if u not in self.kinds or v not in self.kinds:
            raise ValidationError(f"edge ({u}, {v}) has a dangling endpoint")
        if u == v:
            raise ValidationError(f"self-loop on node {u}")
        if self.kinds[u] is NodeKind.SYSTEM:
            raise ValidationError(f"system node {u} cannot be a caller")
        if v in self.succ[u]:
            raise ValidationError(f"duplicate edge ({u}, {v})")
        self._link(u, v)

    # -- raw mutation used by the perturbation operators -------------------
    def _own(self, n: int) -> None:
        if n not in self._owned:
            self.succ[n] = set(self.succ[n])
            self.pred[n] = set(self.pred[n])
            self._owned.add(n)

    def _link(self, u: int, v: int) -> None:
        self._own(u)
        self._own(v)
        self.succ[u].add(v)
        self.pred[v].add(u)
        self.n_edges += 1

    def _unlink(self, u: int, v: int) -> None:
        self._own(u)
        self._own(v)
        self.succ[u].discard(v)
        self.pred[v].discard(u)
        self.n_edges -= 1

    def _drop_node(self, n: int) -> None:
        for v in list(self.succ[n]):
            self._unlink(n, v)
        for u in list(self.pred[n]):
            self._unlink(u, n)
        del self.kinds[n], self.succ[n], self.pred[n]
        self.labels.pop(n, None)
        self._owned.discard(n)

    def copy(self) -> "FunctionCallGraph":
        g = FunctionCallGraph.__new__(FunctionCallGraph)
        g.kinds = self.kinds.copy()
        g.labels = self.labels.copy()
        g.succ = self.succ.copy()
        g.pred = self.pred.copy()
        g.next_id = self.next_id
        g.n_edges = self.n_edges
        g._owned = set()
        # the sets are now shared, so neither side may mutate them in place
        self._owned = set()
        return g

    # -- queries ------------------------------------------------------------
    def __contains__(self, n: int) -> bool:
        return n in self.kinds

    def __len__(self) -> int:
        return len(self.kinds)

    @property
    def n_nodes(self) -> int:
        return len(self.kinds)

    def has_edge(self, u: int, v: int) -> bool:
        s = self.succ.get(u)
        return s is not None and v in s

    def is_user(self, n: int) -> bool:
        k = self.kinds.get(n)
        return k is not None and k is not NodeKind.SYSTEM

    def is_system(self, n: int) -> bool:
        return self.kinds.get(n) is NodeKind.SYSTEM

    def label(self, n: int) -> str:
        lab = self.labels.get(n)
        if lab is None:
            return f"synthetic.F{n}"
        return lab

    def node(self, n: int) -> NodeRecord:
        return NodeRecord(n, self.kinds[n], self.label(n))

    def nodes(self) -> list[int]:
        return sorted(self.kinds)

    def edges(self) -> Iterator[Edge]:
        for u in sorted(self.succ):
            for v in sorted(self.succ[u]):
                yield (u, v)

    def edge_set(self) -> set[Edge]:
        return {(u, v) for u, vs in self.succ.items() for v in vs}

    def system_nodes(self) -> list[int]:
        return sorted(n for n, k in self.kinds.items() if k is NodeKind.SYSTEM)

    def user_nodes(self) -> list[int]:
        return sorted(n for n, k in self.kinds.items() if k is not NodeKind.SYSTEM)

    def validate(self) -> None:
        count = 0
        for u, vs in self.succ.items():
            if vs and self.kinds[u] is NodeKind.SYSTEM:
                raise ValidationError(f"system node {u} has out-edges")
            for v in vs:
                if v not in self.kinds:
                    raise ValidationError(f"edge ({u}, {v}) has a dangling endpoint")
                if u == v:
                    raise ValidationError(f"self-loop on node {u}")
                if u not in self.pred[v]:
                    raise ValidationError(f"adjacency mismatch on ({u}, {v})")
                count += 1
        if count != self.n_edges:
            raise ValidationError("edge counter out of sync")

    def __eq__(self, other) -> bool:
        if not isinstance(other, FunctionCallGraph):
            return NotImplemented
        return (
            self.kinds == other.kinds
            and {n: self.label(n) for n in self.kinds} == {n: other.label(n) for n in other.kinds}
            and self.edge_set() == other.edge_set()
        )

    def __repr__(self) -> str:
        return f"FunctionCallGraph(|V|={self.n_nodes}, |E|={self.n_edges})"


# -- serialization ----------------------------------------------------------

def _kind_of(text: str) -> NodeKind:
    try:
        return NodeKind(text)
    except ValueError:
        raise ParseError(f"unknown node kind {text!r}") from None


def _from_json(data: bytes | str) -> FunctionCallGraph:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(str(exc)) from exc
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise ParseError("expected an object with 'nodes' and 'edges'")
    g = FunctionCallGraph()
    try:
        for rec in doc["nodes"]:
            kind = _kind_of(rec["kind"])
            nid = int(rec["id"])
            label = rec.get("label")
            if kind is NodeKind.SYNTHETIC and label == f"synthetic.F{nid}":
                label = None
            g.add_node(kind, label, nid)
        raw_edges = [(int(u), int(v)) for u, v in doc["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ParseError(f"malformed record: {exc}") from exc
    _insert_edges(g, raw_edges)
    return g


def _insert_edges(g: FunctionCallGraph, edges: Iterable[Edge]) -> None:
    dupes = 0
    for u, v in edges:
        if g.has_edge(u, v):
            dupes += 1
            continue
        g.add_edge(u, v)
    if dupes:
        log.warning("collapsed %d duplicate edge(s)", dupes)


def _from_edge_list(data: bytes | str, system_prefixes: Iterable[str]) -> FunctionCallGraph:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(str(exc)) from exc
    prefixes = tuple(p for p in system_prefixes if p)
    g = FunctionCallGraph()
    ids: dict[str, int] = {}

    def intern(label: str) -> int:
        nid = ids.get(label)
        if nid is None:
            kind = NodeKind.SYSTEM if label.startswith(prefixes) else NodeKind.USER
            nid = ids[label] = g.add_node(kind, label)
        return nid

    edges = []
    for lineno, line in enumerate(data.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'caller callee', got {line!r}")
        edges.append((intern(parts[0]), intern(parts[1])))
    _insert_edges(g, edges)
    return g


def load_fcg(source: bytes | str, format: str = "json", system_prefixes: Iterable[str] = ()) -> FunctionCallGraph:
    """Parse a graph from ``"json"`` or ``"edgelist"`` text."""
    if format == "json":
        return _from_json(source)
    if format == "edgelist":
        return _from_edge_list(source, system_prefixes)
    raise ValueError(f"unknown graph format {format!r}")


def save_fcg(g: FunctionCallGraph, format: str = "json") -> bytes:
    if format == "json":
        nodes = [{"id": n, "kind": g.kinds[n].value, "label": g.label(n)} for n in g.nodes()]
        doc = {"nodes": nodes, "edges": [list(e) for e in g.edges()]}
        return json.dumps(doc, separators=(",", ":")).encode("utf-8")
    if format == "edgelist":
        lines = [f"{g.label(u)} {g.label(v)}" for u, v in g.edges()]
        return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")
    raise ValueError(f"unknown graph format {format!r}")


def read_fcg(path, system_prefixes: Iterable[str] = ()) -> FunctionCallGraph:
    path = str(path)
    with open(path, "rb") as fh:
        data = fh.read()
    fmt = "json" if path.endswith(".json") else "edgelist"
    return load_fcg(data, fmt, system_prefixes)


# -- sensitive APIs and critical area -------------------------------------

@dataclass(frozen=True)
class SensitiveApiIndex:
    signatures: tuple[str, ...]
    position: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pos = {}
        for i, sig in enumerate(self.signatures):
            if sig in pos:
                raise ValidationError(f"duplicate sensitive API {sig!r}")
            pos[sig] = i
        object.__setattr__(self, "position", pos)

    def __len__(self) -> int:
        return len(self.signatures)

    def __contains__(self, sig: str) -> bool:
        return sig in self.position

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "SensitiveApiIndex":
        return cls(tuple(s.strip() for s in lines if s.strip() and not s.startswith("#")))

    @classmethod
    def read(cls, path) -> "SensitiveApiIndex":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)

    def locate(self, g: FunctionCallGraph) -> list[int | None]:
        """Node id per API position (``None`` when the API is absent)."""
        found: list[int | None] = [None] * len(self.signatures)
        for n, k in g.kinds.items():
            if k is NodeKind.SYSTEM:
                i = self.position.get(g.labels.get(n))
                if i is not None:
                    found[i] = n
        return found


@dataclass(frozen=True)
class CriticalArea:
    node_ids: frozenset[int]
    edge_ids: frozenset[Edge]
    anchor_apis: frozenset[int]

    def __bool__(self) -> bool:
        return bool(self.anchor_apis)

    def __len__(self) -> int:
        return len(self.node_ids)


def identify_critical_area(g: FunctionCallGraph, apis: SensitiveApiIndex) -> CriticalArea:
    """Every node that can reach a sensitive API, found by backward BFS."""
    anchors = {n for n in apis.locate(g) if n is not None}
    seen = set(anchors)
    queue = deque(anchors)
    while queue:
        v = queue.popleft()
        for u in g.pred[v]:
            if u not in seen:
                seen.add(u)
                queue.append(u)
    edges = frozenset((u, v) for v in seen for u in g.pred[v])
    return CriticalArea(frozenset(seen), edges, frozenset(anchors))
