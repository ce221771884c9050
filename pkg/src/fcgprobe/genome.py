"""Dependency-grouped individuals, sub-sequence crossover and repairing mutation.

An individual is a flat operator sequence partitioned into sub-sequences:
an operator that uses an element (node or edge) another operator defines
or removes belongs to the same sub-sequence as that operator. Each
sub-sequence remembers the positions of its members, and flattening
merges the sub-sequences back by position, so the execution order is the
one in which the operators were validated. Crossover moves whole
sub-sequences and keeps each parent's relative order, which preserves
every use-after-define and use-before-remove constraint inside a parent.

Every individual carries the graph obtained by replaying it on the base
graph; fitness evaluation reads that cached graph instead of replaying.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InvalidSequence, NoValidOp, RepairFailed
from .graph import CriticalArea, FunctionCallGraph, NodeKind
from .perturb import (
    Op,
    OpSampler,
    OpWeights,
    UseDefSet,
    ValidityError,
    _apply_unchecked,
    check_op,
    op_from_dict,
    op_to_dict,
    remap_op,
    use_def,
)


@dataclass(frozen=True)
class SubSequence:
    ops: tuple[Op, ...]
    use_defs: tuple[UseDefSet, ...]  # each computed against the state the op was applied to
    positions: tuple[int, ...]  # indices into the flat sequence

    def __len__(self) -> int:
        return len(self.ops)

    @property
    def footprint(self) -> UseDefSet:
        d, u, k = set(), set(), set()
        for ud in self.use_defs:
            d |= ud.defines
            u |= ud.uses
            k |= ud.kills
        return UseDefSet(frozenset(d), frozenset(u), frozenset(k))


@dataclass(eq=False)
class Individual:
    ops: list[Op]
    use_defs: list[UseDefSet]
    groups: list[list[int]]  # partition of range(len(ops)), each sorted, ordered by first index
    graph: FunctionCallGraph | None = field(default=None, repr=False)
    generation: int = 0
    abandoned: bool = False
    # evaluation caches, filled by the search loop
    embedding: object = field(default=None, repr=False)
    score: object = field(default=None, repr=False)

    @property
    def subs(self) -> list[SubSequence]:
        return [
            SubSequence(tuple(self.ops[i] for i in grp), tuple(self.use_defs[i] for i in grp), tuple(grp))
            for grp in self.groups
        ]

    def flat(self) -> list[Op]:
        return list(self.ops)

    @property
    def n_ops(self) -> int:
        return len(self.ops)

    def __len__(self) -> int:
        return len(self.groups)

    def to_json(self) -> list:
        """Sub-sequences of op records; ``pos`` gives each op's place in the flat order."""
        return [[dict(op_to_dict(self.ops[i]), pos=i) for i in grp] for grp in self.groups]

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def flat_from_json(doc: list) -> list[Op]:
    """The flat op sequence stored in :meth:`Individual.to_json` output."""
    recs = sorted((d for sub in doc for d in sub), key=lambda d: d["pos"])
    return [op_from_dict(d) for d in recs]


def group(uds: Sequence[UseDefSet]) -> list[list[int]]:
    """Partition op indices into dependency groups.

    Each op joins the earliest group holding an op it depends on (it uses
    something that op defined or removed); when it depends on several
    groups they are merged, so that no group uses an element defined or
    killed in another.
    """
    parent: list[int] = []
    members: list[list[int]] = []

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    # element -> group that last defined or killed it; elements touched by
    # more than one group also keep the full list in ``shared``
    owners: dict = {}
    shared: dict = {}
    for i, ud in enumerate(uds):
        hits = set()
        for e in ud.uses:
            gid = owners.get(e)
            if gid is not None:
                hits.add(find(gid))
                for other in shared.get(e, ()):
                    hits.add(find(other))
        if not hits:
            gid = len(parent)
            parent.append(gid)
            members.append([i])
        else:
            gid = min(hits)
            for other in hits:
                if other != gid:
                    parent[other] = gid
                    members[gid].extend(members[other])
                    members[other] = []
            members[gid].append(i)
        for elems in (ud.defines, ud.kills):
            for e in owners.keys() & elems:
                prev = owners[e]
                if find(prev) != gid:
                    shared.setdefault(e, []).append(prev)
            owners.update(dict.fromkeys(elems, gid))
    groups = [sorted(m) for gid, m in enumerate(members) if parent[gid] == gid and m]
    groups.sort(key=lambda m: m[0])
    return groups


# -- configuration and the breeding context -------------------------------------

@dataclass
class GenomeConfig:
    dependency_aware: bool = True
    keep_prob: float = 0.5
    # failing operators a mutation may fix before it is abandoned
    repair_bound: int = 3
    retarget_tries: int = 8
    # longest individual variation may produce; crossover drops whole groups beyond it
    max_ops: int = 600
    mutation_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)  # adding, removing, updating

    def __post_init__(self):
        self.mutation_weights = tuple(self.mutation_weights)
        if self.max_ops < 1:
            raise ValueError("max_ops must be positive")


MUTATIONS = ("adding", "removing", "updating")


class Breeder:
    """Builds, recombines and mutates individuals against one base graph.

    With ``dependency_aware`` off every operator is its own sub-sequence and
    operators that stop applying are dropped instead of repaired.
    """

    def __init__(self, base: FunctionCallGraph, area: CriticalArea, weights: OpWeights | None = None,
                 config: GenomeConfig | None = None):
        self.base = base
        self.area = area
        self.weights = weights or OpWeights()
        self.config = config or GenomeConfig()
        self.apply_count = 0  # operator checks performed, for budget accounting
        self.abandoned = 0
        self.repairs = 0

    def _sampler(self, g, rng, next_id=None) -> OpSampler:
        return OpSampler(g, self.area, self.weights, rng, next_id)

    def build(self, ops: list[Op], uds: list[UseDefSet], g: FunctionCallGraph, generation: int = 0) -> Individual:
        """Individual for ops that replay cleanly in the given order."""
        if self.config.dependency_aware:
            groups = group(uds)
        else:
            groups = [[i] for i in range(len(ops))]
        return Individual(list(ops), list(uds), groups, g, generation)

    def group_dependencies(self, ops: Sequence[Op], generation: int = 0) -> Individual:
        g = self.base.copy()
        uds = []
        for i, op in enumerate(ops):
            self.apply_count += 1
            try:
                check_op(g, op)
            except ValidityError as exc:
                raise InvalidSequence(f"operator {i} does not apply: {exc}") from None
            uds.append(use_def(op, g))
            _apply_unchecked(g, op)
        return self.build(list(ops), uds, g, generation)

    def init_individual(self, n_ops: int, rng: random.Random, generation: int = 0) -> Individual:
        g = self.base.copy()
        sampler = self._sampler(g, rng)
        ops, uds = [], []
        for _ in range(n_ops):
            op = sampler.draw()
            self.apply_count += 1
            uds.append(use_def(op, g))
            _apply_unchecked(g, op)
            sampler.applied(op)
            ops.append(op)
        return self.build(ops, uds, g, generation)

    # -- replay with repair --------------------------------------------------------
    def _replay(self, ops: Sequence[Op], rng: random.Random, mode: str, hook=None, next_id: int = 0):
        """Replay ops from the base graph under a repair policy.

        ``mode`` is ``"repair"`` (retarget a failing op, else delete it) or
        ``"drop"`` (delete it). ``hook(pos, graph, sampler, op)`` may return a
        replacement list for the op at a flat position. Returns
        ``(ops, use_defs, graph, sampler, fixes)``.
        """
        g = self.base.copy()
        next_id = max(next_id, 1 + max((n for op in ops for n in op.new_ids), default=-1))
        sampler = self._sampler(g, rng, next_id)
        out_ops, out_uds = [], []
        fixes = 0
        for pos, op in enumerate(ops):
            todo = hook(pos, g, sampler, op) if hook is not None else (op,)
            for cur in todo:
                self.apply_count += 1
                try:
                    check_op(g, cur)
                except ValidityError:
                    fixes += 1
                    fixed = None
                    if mode == "repair":
                        fixed = sampler.retarget(cur, self.config.retarget_tries)
                        self.apply_count += self.config.retarget_tries if fixed is None else 1
                    if fixed is None:
                        continue
                    self.repairs += 1
                    cur = fixed
                out_uds.append(use_def(cur, g))
                _apply_unchecked(g, cur)
                sampler.applied(cur)
                out_ops.append(cur)
        return out_ops, out_uds, g, sampler, fixes

    def _mode(self) -> str:
        return "repair" if self.config.dependency_aware else "drop"

    def repair(self, ind: Individual, rng: random.Random | None = None, bound: int | None = None) -> Individual:
        """Replay, retargeting or deleting operators that no longer apply.

        Raises :class:`RepairFailed` if more than ``bound`` operators need
        fixing. A clean individual comes back with the same operators.
        """
        ops, uds, g, _, fixes = self._replay(ind.ops, rng or random.Random(0), self._mode())
        if bound is not None and fixes > bound:
            raise RepairFailed(f"{fixes} operators needed fixing (bound {bound})")
        return self.build(ops, uds, g, ind.generation)

    # -- variation -------------------------------------------------------------------
    def crossover(self, x: Individual, y: Individual, rng: random.Random) -> tuple[Individual, Individual]:
        """Send every sub-sequence of each parent to one of two children.

        A child holds its x-origin operators in x's order followed by its
        y-origin operators in y's order. Synthetic ids of y-origin
        operators that collide with the x-origin part are renamed first.
        A child over ``max_ops`` loses randomly chosen whole sub-sequences.
        """
        p = self.config.keep_prob
        sides = ([], [])
        for k, parent in enumerate((x, y)):
            for grp in parent.groups:
                sides[0 if rng.random() < p else 1].append((k, grp))
        gen = max(x.generation, y.generation) + 1
        kids = []
        for units in sides:
            size = sum(len(grp) for _, grp in units)
            while size > self.config.max_ops:
                _, grp = units.pop(rng.randrange(len(units)))
                size -= len(grp)
            ops_x = [x.ops[i] for i in sorted(i for k, grp in units if k == 0 for i in grp)]
            ops_y = [y.ops[i] for i in sorted(i for k, grp in units if k == 1 for i in grp)]
            ops = ops_x + self._rename(ops_x, ops_y)
            new_ops, uds, g, _, _ = self._replay(ops, rng, self._mode())
            kids.append(self.build(new_ops, uds, g, gen))
        return kids[0], kids[1]

    def _rename(self, kept: list[Op], incoming: list[Op]) -> list[Op]:
        taken = set(self.base.kinds)
        for op in kept:
            taken.update(op.new_ids)
        clash = [n for op in incoming for n in op.new_ids if n in taken]
        if not clash:
            return incoming
        top = max(max(taken, default=-1), max((n for op in incoming for n in op.new_ids), default=-1))
        mapping = {n: top + 1 + j for j, n in enumerate(clash)}
        return [remap_op(op, mapping) for op in incoming]

    def mutate(self, ind: Individual, rng: random.Random) -> Individual:
        """Apply one adding/removing/updating mutation, repairing downstream ops.

        The target sub-sequence and position are chosen uniformly. If more
        than ``repair_bound`` downstream operators need fixing the mutation
        is abandoned: the input's operators come back with ``abandoned`` set.
        """
        if not ind.groups:
            kind, idx = "adding", 0
        else:
            kind = rng.choices(MUTATIONS, self.config.mutation_weights)[0]
            if kind == "adding" and len(ind.ops) >= self.config.max_ops:
                kind = "updating"
            grp = ind.groups[rng.randrange(len(ind.groups))]
            if kind == "adding":
                slot = rng.randrange(len(grp) + 1)
                idx = grp[slot] if slot < len(grp) else grp[-1] + 1
            else:
                idx = grp[rng.randrange(len(grp))]
        n = len(ind.ops)

        def fresh_op(sampler):
            try:
                return sampler.draw()
            except NoValidOp:
                return None

        def hook(pos, g, sampler, op):
            if pos != idx:
                return (op,)
            if kind == "removing":
                return ()
            new = fresh_op(sampler)
            if new is None:
                return (op,)
            return (new, op) if kind == "adding" else (new,)

        ops, uds, g, sampler, fixes = self._replay(ind.ops, rng, self._mode(), hook=hook)
        if kind == "adding" and idx == n:
            new = fresh_op(sampler)
            if new is not None:
                self.apply_count += 1
                uds.append(use_def(new, g))
                _apply_unchecked(g, new)
                ops.append(new)
        if self.config.dependency_aware and fixes > self.config.repair_bound:
            self.abandoned += 1
            return Individual(ind.ops, ind.use_defs, ind.groups, ind.graph, ind.generation, abandoned=True)
        return self.build(ops, uds, g, ind.generation)


# -- thin functional API ------------------------------------------------------------

def _empty_area() -> CriticalArea:
    return CriticalArea(frozenset(), frozenset(), frozenset())


def group_dependencies(ops: Sequence[Op], base: FunctionCallGraph) -> Individual:
    return Breeder(base, _empty_area()).group_dependencies(ops)


def init_individual(g: FunctionCallGraph, area: CriticalArea, n_ops: int, weights: OpWeights | None,
                    rng: random.Random, config: GenomeConfig | None = None) -> Individual:
    return Breeder(g, area, weights, config).init_individual(n_ops, rng)


def cross_dependencies(ind: Individual) -> list[tuple[int, int]]:
    """Pairs (i, j), i < j, in different sub-sequences where op j uses what op i defined or killed.

    Empty for every individual built by :class:`Breeder`.
    """
    owner = {i: gi for gi, grp in enumerate(ind.groups) for i in grp}
    uds = ind.use_defs
    out = []
    for j in range(len(uds)):
        for i in range(j):
            if owner[i] != owner[j] and not uds[j].uses.isdisjoint(uds[i].defkill):
                out.append((i, j))
    return out


def synthetic_count(g: FunctionCallGraph) -> int:
    return sum(1 for k in g.kinds.values() if k is NodeKind.SYNTHETIC)
