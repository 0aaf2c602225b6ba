"""Probabilistic meshing theory as executable code.

Spans are modelled as occupancy bitmasks (Python ints, bit ``i`` set iff
offset ``i`` is live).  Exact oracles are size-capped and refuse larger
inputs rather than silently approximating.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from math import comb

import networkx as nx

from meshalloc.core import Rng
from meshalloc.miniheap import bits_mesh
from meshalloc.mesher import split_mesher

MATCHING_EXACT_CAP = 24
CLIQUE_COVER_EXACT_CAP = 14


# -- closed forms ----------------------------------------------------------------

def _check_occupancy(b, *rs):
    if b < 1:
        raise ValueError("span length must be positive")
    for r in rs:
        if not 0 <= r <= b:
            raise ValueError(f"occupancy {r} outside [0, {b}]")


def pair_mesh_probability(b: int, r1: int, r2: int, exact: bool = False):
    """Probability that random strings with ``r1`` and ``r2`` ones mesh."""
    _check_occupancy(b, r1, r2)
    p = Fraction(comb(b - r1, r2), comb(b, r2))
    return p if exact else float(p)


def triple_mesh_probability(b: int, r1: int, r2: int, r3: int, exact: bool = False):
    """Probability that three random constant-occupancy strings mutually mesh."""
    _check_occupancy(b, r1, r2, r3)
    rest = b - r1 - r2
    second = Fraction(comb(rest, r3), comb(b, r3)) if rest >= 0 else Fraction(0)
    p = Fraction(comb(b - r1, r2), comb(b, r2)) * second
    return p if exact else float(p)


def expected_triangles(n: int, b: int, r: int) -> float:
    return comb(n, 3) * triple_mesh_probability(b, r, r, r)


def independent_triangle_baseline(n: int, b: int, r: int) -> float:
    """Triangle count if pairwise mesh events were independent."""
    return comb(n, 3) * pair_mesh_probability(b, r, r) ** 3


def expected_triangles_independent(n: int, b: int, p: float) -> float:
    """Expected triangles when every bit is set independently with probability ``p``."""
    per_offset = (1 - p) ** 3 + 3 * p * (1 - p) ** 2  # at most one of three set
    return comb(n, 3) * per_offset ** b


def worst_case_mesh_probability(b: int, n: int) -> float:
    """log10 of the chance that ``n`` single-object spans share an offset."""
    if b < 1 or n < 1:
        raise ValueError("b and n must be positive")
    return -(n - 1) * math.log10(b)


def split_matching_bound(n: int, q: float, k: float) -> tuple[float, float]:
    """(matching-size lower bound, per-span good-match rate) for ``t = k/q``."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if k <= 0:
        raise ValueError("k must be positive")
    bound = n * (1 - math.exp(-2 * k)) / 4
    rate = q * (1 - (1 - q) ** (2 * k / q)) / (1 - (1 - q) ** 2)
    floor = (1 - math.exp(-2 * k)) / 2
    assert rate > floor, (rate, floor)
    return bound, rate


def occupancy_for_probability(b: int, q: float) -> int:
    """Constant occupancy whose pair-mesh probability is closest to ``q`` (log scale)."""
    best = None
    for r in range(1, b // 2 + 1):
        p = pair_mesh_probability(b, r, r)
        d = abs(math.log(p) - math.log(q))
        if best is None or d < best[0]:
            best = (d, r)
    return best[1]


# -- random spans -------------------------------------------------------------------

def random_spans_constant_occupancy(n: int, b: int, r: int, rng: Rng) -> list[int]:
    _check_occupancy(b, r)
    offsets = range(b)
    out = []
    for _ in range(n):
        x = 0
        for i in rng.sample(offsets, r):
            x |= 1 << i
        out.append(x)
    return out


def random_spans_independent(n: int, b: int, p: float, rng: Rng) -> list[int]:
    out = []
    for _ in range(n):
        x = 0
        for i in range(b):
            if rng.random() < p:
                x |= 1 << i
        out.append(x)
    return out


# -- meshing graphs -------------------------------------------------------------------

class MeshingGraph:
    """Nodes are occupancy strings; an edge joins every meshable pair."""

    def __init__(self, strings, b: int | None = None):
        self.strings = list(strings)
        self.b = b
        n = len(self.strings)
        adj = [0] * n
        s = self.strings
        for u in range(n):
            su = s[u]
            for v in range(u + 1, n):
                if bits_mesh(su, s[v]):
                    adj[u] |= 1 << v
                    adj[v] |= 1 << u
        self.adj = adj

    @classmethod
    def from_adjacency(cls, adj):
        g = cls.__new__(cls)
        g.strings = None
        g.b = None
        g.adj = list(adj)
        return g

    def __len__(self):
        return len(self.adj)

    def has_edge(self, u, v) -> bool:
        return (self.adj[u] >> v) & 1 == 1

    def edges(self):
        for u, a in enumerate(self.adj):
            a >>= u + 1
            v = u + 1
            while a:
                if a & 1:
                    yield u, v
                a >>= 1
                v += 1

    def edge_count(self) -> int:
        return sum(a.bit_count() for a in self.adj) // 2

    def triangle_count(self) -> int:
        adj = self.adj
        total = 0
        for u, v in self.edges():
            total += (adj[u] & adj[v] & ~((1 << (v + 1)) - 1)).bit_count()
        return total

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(len(self)))
        g.add_edges_from(self.edges())
        return g


def _bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def max_matching_exact(graph: MeshingGraph) -> tuple[int, list[tuple[int, int]]]:
    """Maximum-cardinality matching by memoised search over node subsets."""
    n = len(graph)
    if n > MATCHING_EXACT_CAP:
        raise ValueError(f"exact matching capped at {MATCHING_EXACT_CAP} nodes, got {n}")
    adj = graph.adj

    @lru_cache(maxsize=None)
    def best(mask):
        if mask == 0:
            return 0, ()
        v = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << v)
        top = best(rest)  # v unmatched
        for u in _bits(adj[v] & rest):
            size, pairs = best(rest & ~(1 << u))
            if size + 1 > top[0]:
                top = (size + 1, ((v, u),) + pairs)
        return top

    size, pairs = best((1 << n) - 1)
    return size, list(pairs)


def max_matching(graph: MeshingGraph) -> tuple[int, list[tuple[int, int]]]:
    """Maximum-cardinality matching for any size via Edmonds' blossom (networkx)."""
    m = nx.max_weight_matching(graph.to_networkx(), maxcardinality=True)
    pairs = sorted(tuple(sorted(e)) for e in m)
    return len(pairs), pairs


def min_clique_cover_exact(graph: MeshingGraph) -> int:
    """Fewest disjoint cliques covering every node (exponential; capped)."""
    n = len(graph)
    if n > CLIQUE_COVER_EXACT_CAP:
        raise ValueError(f"exact clique cover capped at {CLIQUE_COVER_EXACT_CAP} nodes, got {n}")
    adj = graph.adj

    def maximal_cliques_with(v, mask):
        # Bron-Kerbosch inside ``mask``, every clique containing v
        out = []

        def expand(r, p, x):
            if not p and not x:
                out.append(r)
                return
            for u in list(_bits(p)):
                bit = 1 << u
                expand(r | bit, p & adj[u], x & adj[u])
                p &= ~bit
                x |= bit

        expand(1 << v, adj[v] & mask, 0)
        return out

    @lru_cache(maxsize=None)
    def cover(mask):
        if mask == 0:
            return 0
        v = (mask & -mask).bit_length() - 1
        return 1 + min(cover(mask & ~c) for c in maximal_cliques_with(v, mask))

    return cover((1 << n) - 1)


def greedy_clique_cover(graph: MeshingGraph, rng: Rng) -> list[list[int]]:
    """Grow cliques from random uncovered nodes, adding any compatible node."""
    n = len(graph)
    adj = graph.adj
    order = list(range(n))
    rng.shuffle(order)
    uncovered = (1 << n) - 1
    cliques = []
    for v in order:
        if not (uncovered >> v) & 1:
            continue
        clique = [v]
        common = adj[v] & uncovered
        cand = list(_bits(common))
        rng.shuffle(cand)
        for u in cand:
            if (common >> u) & 1:
                clique.append(u)
                common &= adj[u]
        for u in clique:
            uncovered &= ~(1 << u)
        cliques.append(clique)
    return cliques


def released_strings(n: int, groups) -> int:
    """Strings freed by meshing each group onto one span: n - rho - phi."""
    rho = sum(1 for g in groups if len(g) >= 2)
    covered = sum(len(g) for g in groups)
    phi = sum(1 for g in groups if len(g) == 1) + (n - covered)
    return n - rho - phi


def matching_groups(n: int, pairs):
    return [list(p) for p in pairs]


# -- experiments --------------------------------------------------------------------------

CONVERGENCE_HEADER = ("model", "b", "n", "occupancy", "trials", "mean_edges",
                      "mean_matching_releases", "mean_cover_releases",
                      "max_gap_fraction")

SPLIT_BOUND_HEADER = ("b", "r", "q", "k", "t", "n", "trials", "bound", "threshold",
                  "mean_matching", "min_matching", "pass_fraction")

TRIANGLE_HEADER = ("b", "r", "n", "samples", "closed_form", "independent_baseline",
                   "mc_mean", "mc_stderr", "z_score")


def convergence_experiment(b=32, n=200, occupancies=None, trials=50, rng=None,
                           model="constant"):
    """Matching releases vs greedy clique-cover releases across occupancy.

    ``model`` is ``"constant"`` (exactly r ones per string) or
    ``"independent"`` (each bit set with probability r/b).
    """
    rng = rng if rng is not None else Rng(0)
    if occupancies is None:
        occupancies = range(1, b + 1)
    rows = []
    for r in occupancies:
        m_total = c_total = e_total = 0
        max_gap = 0.0
        for _ in range(trials):
            if model == "constant":
                spans = random_spans_constant_occupancy(n, b, r, rng)
            elif model == "independent":
                spans = random_spans_independent(n, b, r / b, rng)
            else:
                raise ValueError(f"unknown span model {model!r}")
            g = MeshingGraph(spans, b)
            m, pairs = max_matching(g)
            cover = greedy_clique_cover(g, rng)
            m_rel = released_strings(n, matching_groups(n, pairs))
            c_rel = released_strings(n, cover)
            if m_rel != m or c_rel != n - len(cover):
                raise AssertionError("released-strings identity violated")
            m_total += m_rel
            c_total += c_rel
            e_total += g.edge_count()
            max_gap = max(max_gap, abs(c_rel - m_rel) / n)
        rows.append((model, b, n, r, trials, e_total / trials, m_total / trials,
                     c_total / trials, max_gap))
    return rows


def split_bound_experiment(n=512, b=32, targets=(0.01, 0.05, 0.1), ks=(1, 2), trials=200,
                       rng=None, slack=0.8):
    """SplitMesher matching sizes against the high-probability matching bound.

    For each target q the constant occupancy with the nearest pair-mesh
    probability is used, and ``t = ceil(k / q)`` with that realised q.
    """
    rng = rng if rng is not None else Rng(0)
    rows = []
    for target in targets:
        r = occupancy_for_probability(b, target)
        q = pair_mesh_probability(b, r, r)
        for k in ks:
            t = math.ceil(k / q)
            bound, _ = split_matching_bound(n, q, k)
            threshold = slack * bound
            sizes = []
            for _ in range(trials):
                spans = random_spans_constant_occupancy(n, b, r, rng)
                pairs, _ = split_mesher(spans, t)
                sizes.append(len(pairs))
            passed = sum(1 for s in sizes if s >= threshold)
            rows.append((b, r, q, k, t, n, trials, bound, threshold,
                         sum(sizes) / trials, min(sizes), passed / trials))
    return rows


def triangle_experiment(n=1000, b=32, r=10, samples=50, rng=None):
    rng = rng if rng is not None else Rng(0)
    counts = []
    for _ in range(samples):
        g = MeshingGraph(random_spans_constant_occupancy(n, b, r, rng), b)
        counts.append(g.triangle_count())
    closed = expected_triangles(n, b, r)
    mean = sum(counts) / samples
    var = sum((c - mean) ** 2 for c in counts) / (samples - 1) if samples > 1 else 0.0
    stderr = math.sqrt(var / samples)
    z = (mean - closed) / stderr if stderr else 0.0
    return [(b, r, n, samples, closed, independent_triangle_baseline(n, b, r),
             mean, stderr, z)]


EXPERIMENTS = {
    "convergence": (convergence_experiment, CONVERGENCE_HEADER),
    "split-bound": (split_bound_experiment, SPLIT_BOUND_HEADER),
    "triangles": (triangle_experiment, TRIANGLE_HEADER),
}
