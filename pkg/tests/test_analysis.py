import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from meshalloc import analysis as an
from meshalloc.core import Rng

from test_miniheap import bits


def brute_pair(b, r1, r2):
    """Fraction of (s1, s2) with popcounts r1, r2 that are disjoint."""
    ones = lambda r: [sum(1 << i for i in c) for c in itertools.combinations(range(b), r)]
    a, c = ones(r1), ones(r2)
    return Fraction(sum(1 for x in a for y in c if x & y == 0), len(a) * len(c))


def brute_triple(b, r):
    ss = [sum(1 << i for i in c) for c in itertools.combinations(range(b), r)]
    good = sum(1 for x in ss for y in ss for z in ss if not (x & y or x & z or y & z))
    return Fraction(good, len(ss) ** 3)


@pytest.mark.parametrize("b,r1,r2", [(6, 2, 2), (8, 3, 2), (8, 4, 4), (7, 0, 3), (5, 3, 3)])
def test_pair_probability_matches_enumeration(b, r1, r2):
    assert an.pair_mesh_probability(b, r1, r2, exact=True) == brute_pair(b, r1, r2)


@pytest.mark.parametrize("b,r", [(6, 2), (7, 2), (6, 1), (5, 2)])
def test_triple_probability_matches_enumeration(b, r):
    assert an.triple_mesh_probability(b, r, r, r, exact=True) == brute_triple(b, r)


def test_worked_numbers():
    assert an.pair_mesh_probability(32, 10, 10) == pytest.approx(0.010024, abs=1e-6)
    assert an.expected_triangles(1000, 32, 10) == pytest.approx(1.704, abs=1e-3)
    assert an.independent_triangle_baseline(1000, 32, 10) == pytest.approx(167.347, abs=1e-3)
    assert an.expected_triangles_independent(1000, 32, 10 / 32) == pytest.approx(36_000, rel=0.02)
    assert an.worst_case_mesh_probability(256, 64) == pytest.approx(-151.719, abs=1e-3)


def test_occupancy_choice():
    assert [an.occupancy_for_probability(32, q) for q in (0.01, 0.05, 0.1)] == [10, 8, 7]


def test_split_bound():
    bound, rate = an.split_matching_bound(512, 0.01, 1)
    assert bound == pytest.approx(512 * (1 - math.exp(-2)) / 4)
    assert rate > (1 - math.exp(-2)) / 2
    with pytest.raises(ValueError):
        an.split_matching_bound(512, 0, 1)


def test_input_validation():
    with pytest.raises(ValueError):
        an.pair_mesh_probability(8, 9, 1)
    with pytest.raises(ValueError):
        an.max_matching_exact(an.MeshingGraph.from_adjacency([0] * 25))
    with pytest.raises(ValueError):
        an.min_clique_cover_exact(an.MeshingGraph.from_adjacency([0] * 15))


def test_example_graph():
    g = an.MeshingGraph([bits(s) for s in ("01101000", "01010000", "00100110", "00010000")])
    assert sorted(g.edges()) == [(0, 3), (1, 2), (2, 3)]
    assert an.max_matching_exact(g)[0] == 2
    assert an.min_clique_cover_exact(g) == 2
    assert g.triangle_count() == 0


def random_graph(seed, n, p):
    r = Rng(seed)
    adj = [0] * n
    for u, v in itertools.combinations(range(n), 2):
        if r.random() < p:
            adj[u] |= 1 << v
            adj[v] |= 1 << u
    return an.MeshingGraph.from_adjacency(adj)


def brute_matching(g):
    edges = list(g.edges())
    for k in range(len(g) // 2, 0, -1):
        for combo in itertools.combinations(edges, k):
            nodes = [x for e in combo for x in e]
            if len(nodes) == len(set(nodes)):
                return k
    return 0


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def brute_cover(g):
    return min(len(p) for p in set_partitions(list(range(len(g))))
               if all(g.has_edge(u, v) for blk in p for u, v in itertools.combinations(blk, 2)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 8), st.floats(0.1, 0.9))
def test_exact_oracles_match_brute_force(seed, n, p):
    g = random_graph(seed, n, p)
    size, pairs = an.max_matching_exact(g)
    assert size == len(pairs) == brute_matching(g)
    assert all(g.has_edge(u, v) for u, v in pairs)
    if n <= 7:
        assert an.min_clique_cover_exact(g) == brute_cover(g)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 16), st.floats(0.05, 0.95))
def test_networkx_matching_is_maximum(seed, n, p):
    g = random_graph(seed, n, p)
    size, pairs = an.max_matching(g)
    assert size == an.max_matching_exact(g)[0]
    nodes = [x for e in pairs for x in e]
    assert len(nodes) == len(set(nodes)) and all(g.has_edge(u, v) for u, v in pairs)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 12), st.floats(0.05, 0.95))
def test_cover_bounds(seed, n, p):
    g = random_graph(seed, n, p)
    m = an.max_matching_exact(g)[0]
    exact = an.min_clique_cover_exact(g)
    greedy = an.greedy_clique_cover(g, Rng(seed))
    assert sorted(v for c in greedy for v in c) == list(range(n))
    assert all(g.has_edge(u, v) for c in greedy for u, v in itertools.combinations(c, 2))
    assert exact <= len(greedy)
    assert exact <= n - m
    assert an.released_strings(n, greedy) == n - len(greedy)
    assert an.released_strings(n, an.matching_groups(n, an.max_matching_exact(g)[1])) == m


def test_released_strings_counts_singletons():
    # one triangle, one pair, two singletons, one node not in any group
    groups = [[0, 1, 2], [3, 4], [5], [6]]
    assert an.released_strings(8, groups) == 8 - 2 - 3


def test_triangle_count_matches_networkx():
    import networkx as nx
    g = an.MeshingGraph(an.random_spans_constant_occupancy(120, 16, 4, Rng(3)), 16)
    assert g.triangle_count() == sum(nx.triangles(g.to_networkx()).values()) // 3


def test_low_occupancy_cover_beats_matching():
    # sparse strings mesh in larger cliques, so covering releases more than pairing
    rng = Rng(11)
    for _ in range(10):
        g = an.MeshingGraph(an.random_spans_constant_occupancy(12, 32, 2, rng), 32)
        m = an.max_matching_exact(g)[0]
        assert len(g) - an.min_clique_cover_exact(g) >= m
    g = an.MeshingGraph(an.random_spans_constant_occupancy(200, 32, 3, rng), 32)
    assert len(g) - len(an.greedy_clique_cover(g, rng)) >= an.max_matching(g)[0]


def test_random_span_models():
    rng = Rng(0)
    spans = an.random_spans_constant_occupancy(50, 32, 10, rng)
    assert all(s.bit_count() == 10 and s >> 32 == 0 for s in spans)
    ind = an.random_spans_independent(2000, 32, 0.25, rng)
    mean = sum(s.bit_count() for s in ind) / len(ind)
    assert mean == pytest.approx(8, abs=0.2)


def test_experiments_small():
    rows = an.convergence_experiment(b=16, n=30, occupancies=[4, 8], trials=3, rng=Rng(1))
    assert [r[3] for r in rows] == [4, 8]
    rows = an.split_bound_experiment(n=64, targets=(0.1,), ks=(1,), trials=5, rng=Rng(1))
    assert rows[0][1] == 7 and rows[0][4] == math.ceil(1 / rows[0][2])
    (row,) = an.triangle_experiment(n=100, samples=5, rng=Rng(1))
    assert row[4] == pytest.approx(an.expected_triangles(100, 32, 10))
