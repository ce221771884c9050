import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fcgprobe.embed import (
    AbstractionMap,
    Embedder,
    average_centrality,
    closeness_centrality,
    concentrate_centrality,
    degree_centrality,
    harmonic_centrality,
    katz_centrality,
    markov_embedding,
)
from fcgprobe.errors import AlphaTooLarge, DegenerateGraph, NonConvergent, ParseError
from fcgprobe.graph import FunctionCallGraph, NodeKind, SensitiveApiIndex

from oracles import closeness_oracle, degree_oracle, harmonic_oracle, katz_series, markov_oracle, random_graph
from strategies import graphs


def _chain(n=3):
    g = FunctionCallGraph()
    ids = [g.add_node(NodeKind.USER, f"u{i}") for i in range(n - 1)]
    ids.append(g.add_node(NodeKind.SYSTEM, "api.S.s"))
    for a, b in zip(ids, ids[1:]):
        g.add_edge(a, b)
    return g, SensitiveApiIndex(("api.S.s", "api.Absent.x"))


def _all_system(g):
    return SensitiveApiIndex(tuple(g.label(n) for n in g.system_nodes()))


def test_degree_small():
    g, apis = _chain()
    g.add_edge(0, 2)
    assert degree_centrality(g, apis).tolist() == [1.0, 0.0]


def test_degenerate_graph():
    g = FunctionCallGraph()
    g.add_node(NodeKind.SYSTEM, "api.S.s")
    apis = SensitiveApiIndex(("api.S.s",))
    with pytest.raises(DegenerateGraph):
        degree_centrality(g, apis)
    with pytest.raises(DegenerateGraph):
        closeness_centrality(g, apis)


def test_chain_path_measures():
    g, apis = _chain()
    assert harmonic_centrality(g, apis)[0] == 1.5
    assert closeness_centrality(g, apis)[0] == pytest.approx(4 / 6, abs=1e-15)


def test_no_in_paths_gives_zero():
    g, apis = _chain(2)
    g.add_node(NodeKind.SYSTEM, "api.Absent.x")
    assert harmonic_centrality(g, apis)[1] == 0.0
    assert closeness_centrality(g, apis)[1] == 0.0


def test_katz_two_nodes():
    g = FunctionCallGraph()
    a = g.add_node(NodeKind.USER, "a")
    b = g.add_node(NodeKind.SYSTEM, "b")
    g.add_edge(a, b)
    apis = SensitiveApiIndex(("b", "a"))
    out = katz_centrality(g, apis, alpha=0.1)
    assert out[0] == pytest.approx(0.1, abs=1e-12)
    assert out[1] == 0.0


def test_katz_empty_edges():
    g, apis = _chain(2)
    g2 = FunctionCallGraph()
    g2.add_node(NodeKind.SYSTEM, "api.S.s")
    g2.add_node(NodeKind.USER, "u")
    assert katz_centrality(g2, apis).tolist() == [0.0, 0.0]


def test_katz_alpha_too_large():
    g = FunctionCallGraph()
    ids = [g.add_node(NodeKind.USER, f"u{i}") for i in range(4)]
    s = g.add_node(NodeKind.SYSTEM, "s")
    for u in ids:
        for v in ids:
            if u != v:
                g.add_edge(u, v)
        g.add_edge(u, s)
    with pytest.raises(AlphaTooLarge):
        katz_centrality(g, SensitiveApiIndex(("s",)), alpha=0.5)


def test_katz_nonconvergent():
    g = random_graph(random.Random(2), 30, 0.2)
    with pytest.raises(NonConvergent):
        katz_centrality(g, _all_system(g), alpha=0.02, tol=0.0, max_iter=5)


@given(graphs(max_nodes=50))
def test_centralities_match_oracles(g):
    apis = _all_system(g)
    nodes = apis.locate(g)
    deg, har, clo = degree_centrality(g, apis), harmonic_centrality(g, apis), closeness_centrality(g, apis)
    for i, v in enumerate(nodes):
        assert abs(deg[i] - degree_oracle(g, v)) <= 1e-12
        assert abs(har[i] - harmonic_oracle(g, v)) <= 1e-12
        assert abs(clo[i] - closeness_oracle(g, v)) <= 1e-12


@given(graphs(max_nodes=30))
def test_katz_matches_power_series(g):
    apis = _all_system(g)
    series = katz_series(g, 0.05)
    out = katz_centrality(g, apis, alpha=0.05)
    for i, v in enumerate(apis.locate(g)):
        assert abs(out[i] - series[v]) <= 1e-9


@given(graphs(max_nodes=30))
def test_average_and_concentrate_consistent(g):
    apis = _all_system(g)
    n = len(apis)
    con = concentrate_centrality(g, apis, 0.01)
    avg = average_centrality(g, apis, 0.01)
    assert con.shape == (4 * n,)
    assert np.array_equal(con[:n], degree_centrality(g, apis))
    blocks = con.reshape(4, n)
    assert np.allclose(avg, blocks.sum(axis=0) / 4, atol=1e-15)
    assert np.all(con >= 0)


def test_average_of_known_components(monkeypatch):
    import fcgprobe.embed as emb

    monkeypatch.setattr(emb, "_four", lambda *a: tuple(np.array([v]) for v in (1.0, 0.1, 1.5, 0.5)))
    assert emb.average_centrality(None, None)[0] == pytest.approx(0.775)


@given(graphs(max_nodes=40), st.integers(0, 1000))
def test_permutation_invariance(g, seed):
    apis = _all_system(g)
    ids = g.nodes()
    perm = ids[:]
    random.Random(seed).shuffle(perm)
    mapping = dict(zip(ids, perm))
    h = FunctionCallGraph()
    for n in ids:
        h.add_node(g.kinds[n], g.label(n), mapping[n])
    for u, v in g.edges():
        h.add_edge(mapping[u], mapping[v])
    for scheme in ("degree", "harmonic", "closeness", "katz"):
        e = Embedder(scheme, apis, alpha=0.01)
        assert np.allclose(e(g), e(h), rtol=0, atol=1e-12)


def test_isolated_node_only_moves_normalizers():
    g = random_graph(random.Random(5), 30, 0.1)
    apis = _all_system(g)
    before = degree_centrality(g, apis)
    har = harmonic_centrality(g, apis)
    g.add_node(NodeKind.USER, "lonely")
    n = g.n_nodes
    assert np.allclose(degree_centrality(g, apis), before * (n - 2) / (n - 1), atol=1e-15)
    assert np.array_equal(harmonic_centrality(g, apis), har)
    for i, v in enumerate(apis.locate(g)):
        assert abs(closeness_centrality(g, apis)[i] - closeness_oracle(g, v)) <= 1e-12


# -- Markov transitions --------------------------------------------------------

def test_markov_row_fractions():
    amap = AbstractionMap({"j.": 0, "k.": 1, "l.": 2})
    g = FunctionCallGraph()
    j = g.add_node(NodeKind.USER, "j.a")
    j2 = g.add_node(NodeKind.USER, "j.b")
    k1 = g.add_node(NodeKind.SYSTEM, "k.x")
    k2 = g.add_node(NodeKind.SYSTEM, "k.y")
    l1 = g.add_node(NodeKind.SYSTEM, "l.z")
    g.add_edge(j, k1)
    g.add_edge(j2, k2)
    g.add_edge(j, l1)
    p = markov_embedding(g, amap).reshape(4, 4)
    assert p[0, 1] == 2 / 3 and p[0, 2] == 1 / 3
    assert p[1].tolist() == [0.0] * 4


def test_abstraction_longest_prefix_and_self_defined():
    amap = AbstractionMap.from_lines(["android.\t0\n", "android.telephony.\t1\n", "# c\n"])
    assert amap.state("android.telephony.SmsManager.send") == 1
    assert amap.state("android.app.Activity") == 0
    assert amap.state("com.app.Main") == amap.self_defined == 2
    assert amap.state_count == 3
    with pytest.raises(ParseError):
        AbstractionMap.from_lines(["no tab here\n"])


@given(graphs(max_nodes=50, n_synthetic=4))
def test_markov_matches_count_oracle(g):
    amap = AbstractionMap({"android.api.Api1": 0, "android.": 1, "com.app.C1": 2})
    out = markov_embedding(g, amap)

    def state(n):
        return amap.self_defined if g.kinds[n] is NodeKind.SYNTHETIC else amap.state(g.label(n))

    assert np.max(np.abs(out - markov_oracle(g, state, amap.state_count))) <= 1e-12
    rows = out.reshape(amap.state_count, -1).sum(axis=1)
    assert all(math.isclose(r, 1.0, abs_tol=1e-12) or r == 0.0 for r in rows)


def test_embedder_dims(apis):
    amap = AbstractionMap({f"p{i}.": i for i in range(10)})
    assert Embedder("degree", apis).dim == len(apis)
    assert Embedder("concentrate", apis).dim == 4 * len(apis)
    assert Embedder("mama_family", abstraction=amap).dim == 121
    with pytest.raises(ValueError):
        Embedder("apigraph_cluster", apis)
