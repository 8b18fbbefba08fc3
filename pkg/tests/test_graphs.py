import itertools
import math

import numpy as np
import pytest

from ksatlas.errors import SizeLimitExceeded
from ksatlas.graphs import (
    Graph,
    complete_graph,
    complete_multipartite_graph,
    contextuality_ratio,
    cycle_graph,
    enumerate_n_partitions,
    exclusivity_graph,
    find_n_partition,
    independence_number,
    is_complete_n_partite,
    lovasz_theta,
    maximal_cliques,
)
from ksatlas.scenario import build_scenario, correlator_inequality, Inequality


def brute_alpha(g):
    best = 0
    edge_set = set(g.edges)
    for r in range(g.n, 0, -1):
        for sub in itertools.combinations(range(g.n), r):
            if all((a, b) not in edge_set for a, b in itertools.combinations(sub, 2)):
                return r
    return best


def brute_chromatic(g):
    for k in range(1, g.n + 1):
        for coloring in itertools.product(range(k), repeat=g.n):
            if all(coloring[i] != coloring[j] for i, j in g.edges):
                return k
    return g.n


def random_graph(rng, n_max=10, p=None):
    n = int(rng.integers(2, n_max + 1))
    p = rng.uniform(0.2, 0.8) if p is None else p
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return Graph(n, tuple(edges))


# -- cliques -----------------------------------------------------------------

def test_maximal_cliques_against_networkx():
    nx = pytest.importorskip("networkx")
    rng = np.random.default_rng(2)
    for _ in range(30):
        g = random_graph(rng)
        want = sorted(tuple(sorted(c)) for c in
                      nx.find_cliques(nx.Graph([(i, j) for i, j in g.edges] +
                                               [(v, v) for v in range(g.n)]))
                      )
        want = sorted(tuple(sorted(set(c))) for c in want)
        got = maximal_cliques(g)
        assert got == want


# -- partitions ---------------------------------------------------------------

def test_hexagon_bipartition_is_odd_even():
    part = find_n_partition(cycle_graph(6), 2)
    assert part.parts == ((0, 2, 4), (1, 3, 5))
    assert part.undersized_parts() == []


def test_triangle_has_no_bipartition():
    assert find_n_partition(cycle_graph(3), 2) is None


def test_k22_bipartition():
    part = find_n_partition(complete_multipartite_graph([2, 2]), 2)
    assert part.parts == ((0, 1), (2, 3))


def test_partition_exists_iff_chromatic_number_allows():
    rng = np.random.default_rng(9)
    for _ in range(20):
        g = random_graph(rng, n_max=7)
        chi = brute_chromatic(g)
        for n in range(1, g.n + 1):
            part = find_n_partition(g, n)
            if chi <= n <= g.n:
                assert part is not None, (g, n, chi)
                assert sorted(v for p in part.parts for v in p) == list(range(g.n))
                for p in part.parts:
                    assert all(not g.has_edge(a, b)
                               for a, b in itertools.combinations(p, 2))
            else:
                assert part is None


def test_small_parts_are_flagged():
    part = find_n_partition(Graph(3, ((0, 1),)), 2)
    assert part is not None and part.undersized_parts()


def test_enumerate_partitions_is_deterministic():
    got = list(enumerate_n_partitions(cycle_graph(4), 2))
    assert got[0].parts == ((0, 2), (1, 3))


# -- complete multipartite ------------------------------------------------------

def test_complete_multipartite_detection():
    assert is_complete_n_partite(complete_multipartite_graph([2, 2])).parts == \
        ((0, 1), (2, 3))
    assert is_complete_n_partite(cycle_graph(6)) is None  # misses (0,3) etc.
    k222 = is_complete_n_partite(complete_multipartite_graph([2, 2, 2]))
    assert k222 is not None and [len(p) for p in k222.parts] == [2, 2, 2]


def test_complete_multipartite_iff_nonadjacency_transitive():
    rng = np.random.default_rng(13)
    for _ in range(40):
        g = random_graph(rng, n_max=8)
        non_edges = [(i, j) for i in range(g.n) for j in range(i + 1, g.n)
                     if not g.has_edge(i, j)]
        transitive = True
        for (a, b), (c, d) in itertools.product(non_edges, repeat=2):
            # treat non-adjacency (plus identity) as a relation and check
            # transitivity through shared endpoints
            chain = {a: b, b: a}.get(c)
            if chain is not None and chain != d and g.has_edge(chain, d):
                transitive = False
        verdict = is_complete_n_partite(g)
        if verdict is not None:
            for p in verdict.parts:
                for a, b in itertools.combinations(p, 2):
                    assert not g.has_edge(a, b)
            for pa, pb in itertools.combinations(verdict.parts, 2):
                for a in pa:
                    for b in pb:
                        assert g.has_edge(a, b)
        else:
            assert not transitive or verdict is None


# -- independence number ----------------------------------------------------------

def test_alpha_c5_brute_force():
    assert independence_number(cycle_graph(5)) == 2 == brute_alpha(cycle_graph(5))


def test_alpha_trivial_families():
    for n in (1, 4, 9):
        assert independence_number(Graph(n, ())) == n
        assert independence_number(complete_graph(n)) == 1


def test_alpha_random_vs_brute_force():
    rng = np.random.default_rng(17)
    for _ in range(30):
        g = random_graph(rng, n_max=12)
        assert independence_number(g) == brute_alpha(g)


def test_alpha_size_limit():
    with pytest.raises(SizeLimitExceeded):
        independence_number(Graph(80, ()), size_limit=64)


# -- Lovasz theta ------------------------------------------------------------------

def test_theta_c5_contains_sqrt5():
    lo, hi = lovasz_theta(cycle_graph(5), tol=1e-6)
    assert hi - lo <= 1e-6
    assert lo <= math.sqrt(5) <= hi


def test_theta_closed_forms_for_families():
    for n in range(2, 9):
        lo, hi = lovasz_theta(complete_graph(n), tol=1e-8)
        assert abs(lo - 1) <= 1e-8 and abs(hi - 1) <= 1e-8
        lo, hi = lovasz_theta(Graph(n, ()), tol=1e-8)
        assert abs(lo - n) <= 1e-8 and abs(hi - n) <= 1e-8


def test_theta_odd_cycle_closed_form():
    for n in (5, 7, 9):
        want = n * math.cos(math.pi / n) / (1 + math.cos(math.pi / n))
        lo, hi = lovasz_theta(cycle_graph(n), tol=1e-6)
        assert lo - 1e-9 <= want <= hi + 1e-9


def test_theta_against_cvxpy():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(23)
    for _ in range(5):
        g = random_graph(rng, n_max=9)
        lo, hi = lovasz_theta(g, tol=1e-6)
        x = cp.Variable((g.n, g.n), symmetric=True)
        cons = [cp.trace(x) == 1, x >> 0] + [x[i, j] == 0 for i, j in g.edges]
        prob = cp.Problem(cp.Maximize(cp.sum(x)), cons)
        prob.solve(solver=cp.SCS, eps=1e-8)
        assert lo - 1e-5 <= prob.value <= hi + 1e-5


def test_sandwich_on_random_graphs():
    rng = np.random.default_rng(29)
    for _ in range(25):
        g = random_graph(rng, n_max=14)
        alpha = independence_number(g)
        lo, hi = lovasz_theta(g, tol=1e-5)
        assert alpha <= lo + 1e-5
        assert hi <= g.n + 1e-9


def test_contextuality_ratio_values():
    inv = contextuality_ratio(cycle_graph(5), tol=1e-6)
    assert inv.alpha == 2
    assert abs(inv.ratio_lower - math.sqrt(5) / 2) < 1e-5
    inv = contextuality_ratio(complete_graph(6), tol=1e-6)
    assert inv.alpha == 1 and abs(inv.ratio_upper - 1) < 1e-6
    c7 = contextuality_ratio(cycle_graph(7), tol=1e-6)
    want = 7 * math.cos(math.pi / 7) / (1 + math.cos(math.pi / 7)) / 3
    assert c7.alpha == 3
    assert abs(c7.ratio_lower - want) < 1e-5


# -- exclusivity graphs ---------------------------------------------------------

def kcbs_witness():
    s = build_scenario([f"m{i}" for i in range(5)], [2] * 5,
                       [(i, (i + 1) % 5) for i in range(5)])
    terms = []
    for i in range(5):
        ctx = tuple(sorted((i, (i + 1) % 5)))
        asg = (1, -1) if ctx[0] == i else (-1, 1)
        terms.append((ctx, asg, 1))
    return s, Inequality(tuple(terms), 2, "NCHV", "kcbs")


def test_kcbs_exclusivity_is_c5():
    nx = pytest.importorskip("networkx")
    s, w = kcbs_witness()
    g = exclusivity_graph(w, s)
    assert g.n == 5 and len(g.edges) == 5
    got = nx.Graph(list(g.edges))
    assert nx.is_isomorphic(got, nx.cycle_graph(5))


def test_single_event_witness():
    s = build_scenario(["a", "b"], [2, 2], [(0, 1)])
    w = Inequality((((0, 1), (1, 1), 1),), 1, "NCHV")
    g = exclusivity_graph(w, s)
    assert g.n == 1 and g.edges == ()


def test_chsh_event_form_is_circulant_8_1_4(chsh):
    nx = pytest.importorskip("networkx")
    scenario, ineq = chsh
    g = exclusivity_graph(ineq, scenario)
    assert g.n == 8
    want = nx.circulant_graph(8, [1, 4])
    assert nx.is_isomorphic(nx.Graph(list(g.edges)), want)
