import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fcgprobe.errors import NoValidOp
from fcgprobe.graph import FunctionCallGraph, NodeKind, SensitiveApiIndex, identify_critical_area
from fcgprobe.perturb import (
    AddDenseNodes,
    AddEdge,
    AddLongEdges,
    AddNode,
    AddSparseNodes,
    ErrorKind,
    OpKind,
    OpSampler,
    OpWeights,
    RemoveNode,
    Rewire,
    SequenceError,
    ValidityError,
    apply_op,
    apply_sequence,
    directive_count,
    has_dependency,
    op_from_dict,
    op_to_dict,
    random_op,
    remap_op,
    translate_to_script,
    use_def,
)

from oracles import as_sets, expected_post_state, expected_valid, random_graph, raw_op, snapshot
from strategies import graphs


def small():
    g = FunctionCallGraph()
    u1, u2 = g.add_node(NodeKind.USER, "u1"), g.add_node(NodeKind.USER, "u2")
    s1 = g.add_node(NodeKind.SYSTEM, "s1")
    g.add_edge(u1, u2)
    g.add_edge(u2, s1)
    return g, u1, u2, s1


def test_add_node_example():
    g, u1, _, _ = small()
    h = apply_op(g, AddNode(u1, 10))
    assert h.kinds[10] is NodeKind.SYNTHETIC and h.has_edge(u1, 10)
    assert 10 not in g


def test_rewire_example():
    g, u1, u2, s1 = small()
    u3 = g.add_node(NodeKind.USER, "u3")
    h = apply_op(g, Rewire(u2, s1, u3))
    assert not h.has_edge(u2, s1) and h.has_edge(u2, u3) and h.has_edge(u3, s1)


def test_remove_node_bridges_callers():
    g, u1, u2, s1 = small()
    h = apply_op(g, RemoveNode(u2))
    assert u2 not in h and h.has_edge(u1, s1)
    assert set(h.system_nodes()) == {s1}


def test_remove_node_that_orphans_api_rejected():
    g, u1, u2, s1 = small()
    s2 = g.add_node(NodeKind.SYSTEM, "s2")
    g.add_edge(u1, s2)
    before = snapshot(g)
    with pytest.raises(ValidityError) as exc:
        apply_op(g, RemoveNode(u1), inplace=True)
    assert exc.value.kind is ErrorKind.KIND_VIOLATION
    assert snapshot(g) == before
    assert apply_op(g, RemoveNode(u2)).has_edge(u1, s1)
    g.add_edge(u2, s2)
    assert apply_op(g, RemoveNode(u1)).has_edge(u2, s2)


def test_error_kinds():
    g, u1, u2, s1 = small()
    cases = [
        (AddEdge(u1, 99), ErrorKind.MISSING_NODE),
        (AddEdge(u1, u2), ErrorKind.DUPLICATE_EDGE),
        (AddEdge(s1, u1), ErrorKind.KIND_VIOLATION),
        (Rewire(u1, s1, u2), ErrorKind.MISSING_EDGE),
        (AddNode(u1, u2), ErrorKind.DUPLICATE_NODE),
        (AddSparseNodes(u1, ()), ErrorKind.KIND_VIOLATION),
        (AddLongEdges(u1, u2, ((7,),)), ErrorKind.KIND_VIOLATION),
    ]
    for op, kind in cases:
        with pytest.raises(ValidityError) as exc:
            apply_op(g, op)
        assert exc.value.kind is kind


def test_dense_and_long_counts():
    g, u1, _, s1 = small()
    h = apply_op(g, AddDenseNodes(u1, (10, 11, 12)))
    assert h.n_edges == g.n_edges + 3 + 3
    h = apply_op(g, AddLongEdges(u1, s1, ((20, 21), (22, 23))))
    assert h.n_nodes == g.n_nodes + 4 and h.n_edges == g.n_edges + 6


@given(graphs(max_nodes=30, n_synthetic=2), st.integers(0, 10**6))
def test_ops_match_set_algebra(g, seed):
    rng = random.Random(seed)
    for _ in range(25):
        op = raw_op(rng, g)
        valid = expected_valid(g, op)
        before = snapshot(g)
        if valid:
            want = expected_post_state(g, op)
            apply_op(g, op, inplace=True)
            assert as_sets(g) == want
            g.validate()
        else:
            with pytest.raises(ValidityError):
                apply_op(g, op, inplace=True)
            assert snapshot(g) == before


@given(graphs(max_nodes=30), st.integers(0, 10**6))
def test_apply_sequence_is_a_fold(g, seed):
    rng = random.Random(seed)
    ops, h = [], g.copy()
    for _ in range(15):
        op = raw_op(rng, h)
        if expected_valid(h, op):
            apply_op(h, op, inplace=True)
            ops.append(op)
    assert apply_sequence(g, ops) == h
    bad = ops + [AddEdge(10**6, 10**6 + 1)]
    before = snapshot(g)
    with pytest.raises(SequenceError) as exc:
        apply_sequence(g, bad)
    assert exc.value.index == len(ops)
    assert snapshot(g) == before


def test_use_def_examples():
    ud = use_def(AddNode(1, 9))
    assert ud.defines == {9, (1, 9)} and ud.uses == {1}
    ud = use_def(Rewire(1, 2, 3))
    assert ud.kills == {(1, 2)} and (1, 2) in ud.uses
    assert has_dependency(AddNode(1, 9), AddEdge(9, 2))
    assert not has_dependency(AddEdge(1, 2), AddEdge(3, 4))
    g, u1, u2, s1 = small()
    ud = use_def(RemoveNode(u2), g)
    assert ud.defines == {(u1, s1)}
    assert ud.kills == {u2, (u1, u2), (u2, s1)}


@given(graphs(max_nodes=25), st.integers(0, 10**6))
def test_use_def_against_observed_change(g, seed):
    # defines/kills must cover exactly what the graph gained/lost
    rng = random.Random(seed)
    for _ in range(10):
        op = raw_op(rng, g)
        if not expected_valid(g, op):
            continue
        users, systems, edges = as_sets(g)
        ud = use_def(op, g)
        apply_op(g, op, inplace=True)
        u2, s2, e2 = as_sets(g)
        gained = (u2 - users) | (e2 - edges)
        lost = (users - u2) | (edges - e2)
        assert gained == set(ud.defines)
        assert lost <= set(ud.kills)
        assert uses_exist(ud.uses, users | systems, edges)


def uses_exist(uses, nodes, edges):
    return all((u in edges) if isinstance(u, tuple) else (u in nodes) for u in uses)


def test_op_dict_round_trip():
    ops = [AddNode(1, 9), AddEdge(1, 2), Rewire(1, 2, 3), RemoveNode(4),
           AddSparseNodes(1, (5, 6)), AddDenseNodes(1, (7, 8)), AddLongEdges(1, 2, ((3, 4), (5, 6)))]
    for op in ops:
        assert op_from_dict(json.loads(json.dumps(op_to_dict(op)))) == op
        assert remap_op(op, {}) == op
    assert remap_op(AddNode(1, 9), {9: 20}) == AddNode(1, 20)


def test_script_lines_per_op():
    ops = [AddNode(1, 9), AddEdge(1, 2), Rewire(1, 2, 3), RemoveNode(4),
           AddSparseNodes(1, (5, 6, 7)), AddDenseNodes(1, (5, 6, 7, 8)), AddLongEdges(1, 2, ((3, 4, 5), (6, 7, 8)))]
    script = translate_to_script(ops, {1: "com.app.Main.run"})
    lines = script.splitlines()
    assert lines[0].startswith("#") and "com.app.Main.run" in script
    body = [ln for ln in lines if not ln.startswith("#")]
    assert len(body) == sum(directive_count(op) for op in ops)
    for i, op in enumerate(ops):
        assert sum(1 for ln in body if f"\top={i}\t" in ln) == directive_count(op)
    assert translate_to_script(ops) == translate_to_script(ops)


@given(st.integers(0, 10**6))
def test_sampler_draws_valid_ops(seed):
    rng = random.Random(seed)
    g = random_graph(rng, 40, 0.1)
    apis = SensitiveApiIndex(tuple(g.label(n) for n in g.system_nodes()))
    area = identify_critical_area(g, apis)
    if not any(g.is_user(n) for n in area.node_ids):
        with pytest.raises(NoValidOp):
            random_op(g, area, rng=rng)
        return
    sampler = OpSampler(g, area, OpWeights(), rng)
    for _ in range(30):
        op = sampler.draw()
        assert expected_valid(g, op)
        for n in op.new_ids:
            assert n not in g
        apply_op(g, op, inplace=True)
        sampler.applied(op)
        touched = [n for n in (getattr(op, a, None) for a in ("caller", "anchor", "source", "target")) if n is not None]
        for n in touched:
            assert n in area.node_ids or g.kinds.get(n) is NodeKind.SYNTHETIC or op.kind is OpKind.REMOVE_NODE


def test_weights_round_trip_and_validation():
    w = OpWeights(weights={OpKind.ADD_NODE: 2.0, OpKind.REMOVE_NODE: 0.0})
    assert OpWeights.from_dict(json.loads(json.dumps(w.to_dict()))) == w
    with pytest.raises(ValueError):
        OpWeights(weights={OpKind.ADD_NODE: 0.0})
