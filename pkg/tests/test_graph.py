"""Window construction, centralities, and Freeman centralization."""

import random
from datetime import timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orgsignals import _betweenness_py
from orgsignals.graph import (
    CentralizationError,
    DegenerateWindowError,
    TimeWindowConfig,
    WindowedGraph,
    _kernel,
    _symmetrized_csr,
    betweenness_centrality,
    build_windows,
    degree_centrality,
    group_centralization,
    window_spans,
)

from conftest import T0, mk_event
from oracles import brute_betweenness

KERNELS = [_betweenness_py.brandes_accumulate]
if _kernel is not _betweenness_py:
    KERNELS.append(_kernel.brandes_accumulate)


def make_graph(n, edges):
    nodes = [f"n{i:02d}@x.com" for i in range(n)]
    edge_map = {(nodes[a], nodes[b]): (1, 1.0) for a, b in edges}
    return WindowedGraph(0, T0, T0 + timedelta(days=7), nodes, edge_map), nodes


def star_edges(n):
    return [(0, i) for i in range(1, n)]


def cycle_edges(n):
    return [(i, (i + 1) % n) for i in range(n)]


# ---------------------------------------------------------------------------
# build_windows
# ---------------------------------------------------------------------------

def test_single_event_lands_in_first_window():
    events = [mk_event("a@x.com", ["b@x.com"], hours=0)]
    cfg = TimeWindowConfig(corpus_start=T0, corpus_end=T0 + timedelta(days=14))
    graphs = build_windows(events, cfg)
    assert len(graphs) == 2
    assert graphs[0].edges == {("a@x.com", "b@x.com"): (1, 1.0)}
    assert graphs[1].edges == {}
    assert graphs[1].nodes == []


def test_recipient_weights_accumulate():
    events = [mk_event("a@x.com", [("b@x.com", 1.0), ("c@x.com", 0.5)], hours=1)]
    cfg = TimeWindowConfig(corpus_start=T0, corpus_end=T0 + timedelta(days=7))
    (g,) = build_windows(events, cfg)
    assert g.edges[("a@x.com", "b@x.com")] == (1, 1.0)
    assert g.edges[("a@x.com", "c@x.com")] == (1, 0.5)


def test_sliding_windows_event_membership_matches_enumeration():
    # derived oracle: enumerate the 7d/1d spans that contain day 10
    cfg = TimeWindowConfig(
        window_length=timedelta(days=7),
        step=timedelta(days=1),
        corpus_start=T0,
        corpus_end=T0 + timedelta(days=20),
    )
    spans = window_spans(cfg)
    event_time = T0 + timedelta(days=10)
    expected = [i for i, (lo, hi) in enumerate(spans) if lo <= event_time < hi]
    assert len(expected) == 7

    events = [mk_event("a@x.com", ["b@x.com"], hours=240)]
    graphs = build_windows(events, cfg)
    populated = [g.window_index for g in graphs if g.edges]
    assert populated == expected


def test_empty_corpus_range_gives_no_windows():
    cfg = TimeWindowConfig(corpus_start=T0, corpus_end=T0)
    assert build_windows([], cfg) == []


def test_unit_filter_keeps_only_unit_senders():
    mapping = {"a@x.com": "u1", "b@x.com": "u2"}
    events = [
        mk_event("a@x.com", ["b@x.com"], hours=0),
        mk_event("b@x.com", ["a@x.com"], hours=1),
    ]
    cfg = TimeWindowConfig(corpus_start=T0, corpus_end=T0 + timedelta(days=7))
    (g,) = build_windows(events, cfg, unit_filter=("u1", mapping))
    assert list(g.edges) == [("a@x.com", "b@x.com")]


def test_window_isolation_under_added_edge():
    cfg = TimeWindowConfig(corpus_start=T0, corpus_end=T0 + timedelta(days=21))
    base = [mk_event("a@x.com", ["b@x.com"], hours=0)]
    extra = base + [mk_event("c@x.com", ["d@x.com"], hours=10 * 24)]
    before = build_windows(base, cfg)
    after = build_windows(extra, cfg)
    assert before[0].edges == after[0].edges
    assert before[2].edges == after[2].edges


def test_invalid_window_config():
    with pytest.raises(ValueError):
        TimeWindowConfig(window_length=timedelta(0))
    with pytest.raises(ValueError):
        TimeWindowConfig(step=timedelta(days=-1))


@given(
    st.integers(1, 14),   # window length days
    st.integers(1, 14),   # step days
    st.integers(0, 40 * 24),  # event offset hours
)
@settings(max_examples=80, deadline=None)
def test_event_membership_matches_span_arithmetic(length, step, offset):
    cfg = TimeWindowConfig(
        window_length=timedelta(days=length),
        step=timedelta(days=step),
        corpus_start=T0,
        corpus_end=T0 + timedelta(days=40),
    )
    event = mk_event("a@x.com", ["b@x.com"], hours=offset)
    graphs = build_windows([event], cfg)
    populated = {g.window_index for g in graphs if g.edges}
    expected = {
        i for i, (lo, hi) in enumerate(window_spans(cfg))
        if lo <= event.timestamp < hi
    }
    assert populated == expected


# ---------------------------------------------------------------------------
# degree centrality
# ---------------------------------------------------------------------------

def test_degree_star_center():
    g, nodes = make_graph(5, star_edges(5))
    c = degree_centrality(g)
    assert c[nodes[0]] == 1.0
    assert all(c[v] == 0.25 for v in nodes[1:])


def test_degree_five_cycle():
    g, nodes = make_graph(5, cycle_edges(5))
    assert set(degree_centrality(g).values()) == {0.5}


def test_degree_two_dyads():
    g, nodes = make_graph(4, [(0, 1), (2, 3)])
    assert set(degree_centrality(g).values()) == {1 / 3}


def test_degree_degenerate():
    g, _ = make_graph(1, [])
    with pytest.raises(DegenerateWindowError, match="degenerate window"):
        degree_centrality(g)


# ---------------------------------------------------------------------------
# betweenness centrality
# ---------------------------------------------------------------------------

def test_betweenness_path():
    g, nodes = make_graph(3, [(0, 1), (1, 2)])
    c = betweenness_centrality(g)
    assert c[nodes[1]] == 1.0
    assert c[nodes[0]] == c[nodes[2]] == 0.0


def test_betweenness_four_cycle_derived():
    g, nodes = make_graph(4, cycle_edges(4))
    c = betweenness_centrality(g)
    for v in nodes:
        assert c[v] == pytest.approx(1 / 6, abs=1e-12)


def test_betweenness_star():
    g, nodes = make_graph(5, star_edges(5))
    c = betweenness_centrality(g)
    assert c[nodes[0]] == 1.0
    assert all(c[v] == 0.0 for v in nodes[1:])


def test_betweenness_degenerate():
    g, _ = make_graph(1, [])
    with pytest.raises(DegenerateWindowError):
        betweenness_centrality(g)


def test_betweenness_n2_is_zero():
    g, nodes = make_graph(2, [(0, 1)])
    assert betweenness_centrality(g) == {nodes[0]: 0.0, nodes[1]: 0.0}


def test_edgeless_graph_all_zero():
    g, nodes = make_graph(4, [])
    assert set(betweenness_centrality(g).values()) == {0.0}
    assert set(degree_centrality(g).values()) == {0.0}
    assert group_centralization(degree_centrality(g), "degree") == 0.0


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.__module__.rsplit(".", 1)[-1])
def test_betweenness_matches_brute_force_random_graphs(kernel):
    rng = random.Random(1234)
    for _ in range(60):
        n = rng.randint(3, 8)
        edges = {
            (a, b)
            for a in range(n)
            for b in range(a + 1, n)
            if rng.random() < rng.choice([0.2, 0.4, 0.7])
        }
        g, nodes = make_graph(n, edges)
        indptr, indices, _ = _symmetrized_csr(g)
        scores = kernel(indptr, indices, n)
        normalized = [s / ((n - 1) * (n - 2)) for s in scores]
        expected = brute_betweenness(n, edges)
        for i in range(n):
            assert abs(normalized[i] - float(expected[i])) <= 1e-12


def test_both_kernels_agree_on_larger_graph():
    if len(KERNELS) < 2:
        pytest.skip("compiled kernel not built")
    rng = random.Random(7)
    n = 60
    edges = {(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < 0.08}
    g, _ = make_graph(n, edges)
    indptr, indices, _ = _symmetrized_csr(g)
    pure = _betweenness_py.brandes_accumulate(indptr, indices, n)
    fast = KERNELS[1](indptr, indices, n)
    assert pure == pytest.approx(list(fast), abs=1e-9)


def test_betweenness_values_in_unit_interval_fuzz():
    rng = random.Random(99)
    for _ in range(40):
        n = rng.randint(2, 12)
        edges = {
            (a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < 0.3
        }
        g, _ = make_graph(n, edges)
        for value in betweenness_centrality(g).values():
            assert 0.0 <= value <= 1.0
        for value in degree_centrality(g).values():
            assert 0.0 <= value <= 1.0


# ---------------------------------------------------------------------------
# group centralization
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["degree", "betweenness"])
def test_star_centralization_is_one(kind):
    g, _ = make_graph(5, star_edges(5))
    c = degree_centrality(g) if kind == "degree" else betweenness_centrality(g)
    assert group_centralization(c, kind) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kind", ["degree", "betweenness"])
def test_cycle_centralization_is_zero(kind):
    g, _ = make_graph(5, cycle_edges(5))
    c = degree_centrality(g) if kind == "degree" else betweenness_centrality(g)
    assert group_centralization(c, kind) == pytest.approx(0.0, abs=1e-12)


def test_centralization_zero_iff_equal():
    assert group_centralization({"a": 0.4, "b": 0.4, "c": 0.4}, "degree") == 0.0
    assert group_centralization({"a": 0.5, "b": 0.4, "c": 0.4}, "degree") > 0.0


def test_centralization_undefined_below_three():
    with pytest.raises(CentralizationError, match="centralization undefined"):
        group_centralization({"a": 1.0, "b": 0.0}, "degree")


def test_centralization_invariant_under_relabeling():
    rng = random.Random(5)
    for _ in range(20):
        n = rng.randint(3, 9)
        edges = {
            (a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < 0.4
        }
        g, nodes = make_graph(n, edges)
        value = group_centralization(betweenness_centrality(g), "betweenness")

        perm = list(range(n))
        rng.shuffle(perm)
        relabeled = {(perm[a], perm[b]) for a, b in edges}
        g2, _ = make_graph(n, relabeled)
        value2 = group_centralization(betweenness_centrality(g2), "betweenness")
        assert value == pytest.approx(value2, abs=1e-12)


def test_unknown_centralization_kind():
    with pytest.raises(ValueError, match="unknown centralization kind"):
        group_centralization({"a": 1.0, "b": 0.0, "c": 0.0}, "closeness")
