import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fcgprobe.errors import ParseError, ValidationError
from fcgprobe.graph import (
    FunctionCallGraph,
    NodeKind,
    SensitiveApiIndex,
    identify_critical_area,
    load_fcg,
    save_fcg,
)

from strategies import graphs
from oracles import as_sets, bfs_to, random_graph


def _doc(nodes, edges):
    return json.dumps({"nodes": nodes, "edges": edges})


def test_load_small_json():
    doc = _doc(
        [{"id": 0, "kind": "user", "label": "u1"}, {"id": 1, "kind": "user", "label": "u2"},
         {"id": 2, "kind": "system", "label": "s1"}],
        [[0, 1], [1, 2]],
    )
    g = load_fcg(doc)
    assert g.n_nodes == 3 and g.n_edges == 2
    assert g.is_system(2) and g.is_user(0)


def test_system_caller_rejected():
    doc = _doc([{"id": 0, "kind": "user", "label": "u1"}, {"id": 1, "kind": "system", "label": "s1"}], [[1, 0]])
    with pytest.raises(ValidationError):
        load_fcg(doc)


def test_dangling_edge_rejected():
    with pytest.raises(ValidationError):
        load_fcg(_doc([{"id": 0, "kind": "user", "label": "u"}], [[0, 7]]))


@pytest.mark.parametrize("bad", [b"", b"{", b"[]", b'{"nodes": [{"id": 0}], "edges": []}',
                                 b'{"nodes": [{"id": 0, "kind": "weird", "label": "x"}], "edges": []}'])
def test_malformed_json(bad):
    with pytest.raises(ParseError):
        load_fcg(bad)


def test_duplicate_edges_collapse(caplog):
    doc = _doc([{"id": 0, "kind": "user", "label": "a"}, {"id": 1, "kind": "user", "label": "b"}], [[0, 1], [0, 1]])
    g = load_fcg(doc)
    assert g.n_edges == 1
    assert "duplicate" in caplog.text


def test_edgelist_kinds_from_prefixes():
    text = "com.app.Main.run android.telephony.SmsManager.send\ncom.app.Main.run com.app.Util.f\n"
    g = load_fcg(text, "edgelist", ["android."])
    kinds = {g.label(n): g.kinds[n] for n in g.nodes()}
    assert kinds["android.telephony.SmsManager.send"] is NodeKind.SYSTEM
    assert kinds["com.app.Util.f"] is NodeKind.USER
    with pytest.raises(ParseError):
        load_fcg("only_one_token\n", "edgelist")


def test_empty_graph_serialization():
    assert save_fcg(FunctionCallGraph()) == b'{"nodes":[],"edges":[]}'


@given(graphs(max_nodes=200, n_synthetic=3))
def test_json_round_trip(g):
    data = save_fcg(g)
    assert save_fcg(g) == data
    assert load_fcg(data) == g


@given(graphs(max_nodes=60))
def test_edgelist_round_trip(g):
    # only nodes with an edge survive the edge-list format
    text = save_fcg(g, "edgelist")
    h = load_fcg(text, "edgelist", ["android."])
    lab = lambda gr: {(gr.label(u), gr.label(v)) for u, v in gr.edges()}  # noqa: E731
    assert lab(h) == lab(g)


def test_copy_is_independent():
    g = random_graph(random.Random(3), 20, 0.2)
    h = g.copy()
    u = next(n for n in h.nodes() if h.is_user(n))
    v = h.add_node(NodeKind.USER, "fresh")
    h.add_edge(u, v)
    assert v not in g and not g.has_edge(u, v)
    g.validate()
    h.validate()


def test_sensitive_index_positions():
    idx = SensitiveApiIndex.from_lines(["# comment\n", "a.B.c\n", "\n", "d.E.f\n"])
    assert idx.signatures == ("a.B.c", "d.E.f")
    assert idx.position == {"a.B.c": 0, "d.E.f": 1}
    with pytest.raises(ValidationError):
        SensitiveApiIndex(("x", "x"))


def test_critical_area_chain():
    g = FunctionCallGraph()
    u1, u2, u3 = (g.add_node(NodeKind.USER, f"u{i}") for i in (1, 2, 3))
    s1 = g.add_node(NodeKind.SYSTEM, "s1")
    g.add_edge(u2, u1)
    g.add_edge(u1, s1)
    area = identify_critical_area(g, SensitiveApiIndex(("s1",)))
    assert area.node_ids == {u1, u2, s1}
    assert area.edge_ids == {(u2, u1), (u1, s1)}
    assert area.anchor_apis == {s1}
    assert u3 not in area.node_ids


def test_critical_area_empty_without_sensitive_api():
    g = random_graph(random.Random(0), 20)
    area = identify_critical_area(g, SensitiveApiIndex(("not.present",)))
    assert not area and len(area) == 0


@given(graphs(max_nodes=50), st.data())
def test_critical_area_matches_reachability(g, data):
    labels = [g.label(n) for n in g.system_nodes()]
    chosen = data.draw(st.lists(st.sampled_from(labels), unique=True, max_size=len(labels)))
    area = identify_critical_area(g, SensitiveApiIndex(tuple(chosen)))
    _, _, edges = as_sets(g)
    anchors = {n for n in g.system_nodes() if g.label(n) in chosen}
    reach = set()
    for a in anchors:
        reach |= set(bfs_to(edges, g.kinds, a))
    assert area.anchor_apis == anchors
    assert area.node_ids == reach
    assert area.edge_ids == {(u, v) for u, v in edges if v in reach}


@given(graphs(max_nodes=40), st.integers(0, 10**6))
def test_critical_area_monotone_under_edge_insertion(g, k):
    apis = SensitiveApiIndex(tuple(g.label(n) for n in g.system_nodes()))
    before = identify_critical_area(g, apis).node_ids
    users = g.user_nodes()
    rng = random.Random(k)
    u, v = rng.choice(users), rng.choice(g.nodes())
    if u != v and not g.has_edge(u, v):
        g.add_edge(u, v)
    assert before <= identify_critical_area(g, apis).node_ids
