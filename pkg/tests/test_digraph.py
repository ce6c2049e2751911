from collections import Counter
from itertools import product

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import connected_components

from permwalk.digraph import (
    VertexSet,
    ball,
    boundary,
    build,
    component_counts,
    distance,
    distances_from,
    edges_out,
    is_strongly_connected,
    neighbors,
    plus_minus_one,
    square,
    strongly_connected_components,
)
from permwalk.markov import kernel
from permwalk.perm import all_permutations, identity

from conftest import random_sigmas


def all_sets(n):
    for mask in range(1 << (2 * n + 1)):
        yield VertexSet(n, mask)


def test_build_identity_adjacency():
    g = build(identity(1))
    assert g.out(-1) == [-1, 0]
    assert g.out(0) == [-1, 1]
    assert g.out(1) == [0, 1]
    assert sorted(build(identity(2)).out(0)) == [-1, 1]


def test_build_follows_definition(sigmas):
    for s in sigmas(7, 20):
        g = build(s)
        n = s.n
        for x in range(-n, n + 1):
            if x == -n:
                expect = [s(-n), s(-n + 1)]
            elif x == n:
                expect = [s(n - 1), s(n)]
            else:
                expect = [s(x - 1), s(x + 1)]
            assert g.out(x) == expect


@pytest.mark.parametrize("n", [1, 2])
def test_regularity_exhaustive(n):
    for s in all_permutations(n):
        g = build(s)
        g2 = square(g)
        for gg, d in ((g, 2), (g2, 4)):
            indeg = Counter(v for _, v in gg.edge_multiset().elements())
            assert all(indeg[x] == d for x in range(-n, n + 1))
            assert gg.out_adj.shape == (2 * n + 1, d)


@pytest.mark.parametrize("n", [10, 100])
def test_regularity_random(n):
    for s in random_sigmas(n, 100):
        g = build(s)
        assert np.bincount(g.out_adj.ravel(), minlength=g.size).tolist() == [2] * g.size
        g2 = square(g)
        assert np.bincount(g2.out_adj.ravel(), minlength=g.size).tolist() == [4] * g.size


def test_square_identity_example():
    g2 = square(build(identity(1)))
    assert Counter(g2.out(-1)) == Counter([-1, 0, -1, 1])
    assert g2.out_adj.size == 4 * 3


def test_square_matches_two_step_kernel(sigmas):
    for s in sigmas(3, 20):
        g = build(s)
        P = kernel(g).matrix.toarray()
        mult = np.zeros_like(P)
        for (u, v), m in square(g).edge_multiset().items():
            mult[u + 3, v + 3] = m
        assert np.allclose(P @ P, mult / 4, atol=1e-15)


def test_square_edges_are_two_paths():
    # brute force: count length-2 paths through every middle vertex
    for s in random_sigmas(4, 10):
        g = build(s)
        expect = Counter()
        for x in range(-4, 5):
            for mid in g.out(x):
                for z in g.out(mid):
                    expect[(x, z)] += 1
        assert square(g).edge_multiset() == expect


def test_scc_small_cases():
    assert is_strongly_connected([[1], [0]])
    assert not is_strongly_connected([[1], []])
    assert is_strongly_connected({"a": ["b"], "b": ["a"]})
    assert sorted(map(sorted, strongly_connected_components([[1], [0], [0]]))) == [[0, 1], [2]]


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12).flatmap(lambda k: st.lists(st.lists(st.integers(0, k - 1), max_size=3), min_size=k, max_size=k)))
def test_scc_matches_scipy(adj):
    k = len(adj)
    rows = [u for u, vs in enumerate(adj) for _ in vs]
    cols = [v for vs in adj for v in vs]
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(k, k))
    ncomp, labels = connected_components(A, directed=True, connection="strong")
    comps = strongly_connected_components(adj)
    assert len(comps) == ncomp
    for comp in comps:
        assert len({labels[v] for v in comp}) == 1
    assert is_strongly_connected(adj) == (ncomp == 1)


@pytest.mark.parametrize("n", [1, 2])
def test_strongly_connected_exhaustive(n):
    assert all(is_strongly_connected(build(s).out_adj) for s in all_permutations(n))


def test_neighbors_boundary_examples():
    g = build(identity(2))
    A = VertexSet.of(2, [0])
    assert neighbors(A, g).vertices() == [-1, 1]
    assert boundary(A, g).vertices() == [-1, 1]
    assert edges_out(A, g) == 2
    g1 = build(identity(1))
    A = VertexSet.of(1, [-1])
    assert neighbors(A, g1).vertices() == [-1, 0]
    assert boundary(A, g1).vertices() == [0]
    assert edges_out(A, g1) == 1
    empty = VertexSet(2)
    assert neighbors(empty, g).size() == 0 and boundary(empty, g).size() == 0 and edges_out(empty, g) == 0
    with pytest.raises(ValueError):
        neighbors(VertexSet.of(1, [0]), g)


def _edges_out_brute(A, g):
    return sum(m for (u, v), m in g.edge_multiset().items() if u in A and v not in A)


@pytest.mark.parametrize("n", [1, 2])
def test_neighbor_growth_and_sigma_image_exhaustive(n):
    for s in all_permutations(n):
        g = build(s)
        g2 = square(g)
        for A in all_sets(n):
            N = neighbors(A, g)
            assert N.size() >= A.size()
            assert edges_out(A, g) == _edges_out_brute(A, g)
            assert edges_out(A, g2) == _edges_out_brute(A, g2)
            image = VertexSet.of(n, [s(x) for x in plus_minus_one(A)])
            assert (image - N).size() == 0


def test_neighbor_growth_random():
    rng = np.random.default_rng(0)
    for s in random_sigmas(10, 30):
        g = build(s)
        for _ in range(50):
            A = VertexSet.from_bool(10, rng.random(21) < rng.random())
            assert neighbors(A, g).size() >= A.size()
            image = VertexSet.of(10, [s(x) for x in plus_minus_one(A)])
            assert (image - neighbors(A, g)).size() == 0


def test_plus_minus_one_examples():
    assert plus_minus_one(VertexSet.of(2, [0])).vertices() == [-1, 1]
    assert plus_minus_one(VertexSet.of(2, [2])).vertices() == [1]
    assert plus_minus_one(VertexSet.of(2, [-2, 0, 2])).vertices() == [-1, 1]


def _runs_brute(A):
    # union-find on x ~ x+2 within A, split by parity
    verts = A.vertices()
    parent = {v: v for v in verts}

    def find(v):
        while parent[v] != v:
            v = parent[v]
        return v

    for v in verts:
        if v + 2 in parent:
            parent[find(v)] = find(v + 2)
    roots = {find(v) for v in verts}
    return sum(1 for r in roots if r % 2 == 0), sum(1 for r in roots if r % 2)


def test_component_counts_examples_and_oracle():
    assert component_counts(VertexSet.of(2, [-2, 0, 2])) == (1, 0)
    assert component_counts(VertexSet.of(2, [-2, 2])) == (2, 0)
    assert component_counts(VertexSet(2)) == (0, 0)
    for A in all_sets(4):
        assert component_counts(A) == _runs_brute(A)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_key_inequality_small(n):
    for A in all_sets(n):
        if A.size() <= n:
            ke, ko = component_counts(A)
            assert plus_minus_one(A).size() >= A.size() + ke + ko - 4


def test_distance_examples():
    g = build(identity(1))
    assert distance(g, -1, 1) == 2
    assert all(distance(g, x, x) == 0 for x in (-1, 0, 1))
    with pytest.raises(ValueError):
        distance(g, 0, 5)


def test_triangle_inequality():
    for s in random_sigmas(10, 20):
        g = build(s)
        D = np.array([[distance(g, x, y) for y in range(-10, 11)] for x in range(-10, 11)])
        for y in range(21):
            assert np.all(D <= D[:, [y]] + D[[y], :])


def test_ball_properties():
    g = build(identity(3))
    assert ball(g, 1, 0).vertices() == [1]
    for s in random_sigmas(20, 50):
        g = build(s)
        for w in range(-20, 21):
            prev = ball(g, w, 0)
            for r in range(1, 8):
                cur = ball(g, w, r)
                assert (cur - prev).size() <= 2**r
                prev = cur
            assert ball(g, w, 4 * 20).size() == 41


def test_edge_list_export():
    text = build(identity(1)).to_edge_list()
    lines = text.splitlines()
    assert lines[0] == "# permwalk-digraph n=1"
    assert lines[1:] == ["-1\t-1\t1", "-1\t0\t1", "0\t-1\t1", "0\t1\t1", "1\t0\t1", "1\t1\t1"]


def test_vertex_set_basics():
    A = VertexSet.of(3, [-3, 0, 3])
    assert A.size() == len(A) == 3
    assert 0 in A and 1 not in A and 7 not in A
    assert A.complement().size() == 4
    assert list(VertexSet.from_bool(3, A.to_bool())) == [-3, 0, 3]
    with pytest.raises(ValueError):
        VertexSet.of(3, [4])
    with pytest.raises(ValueError):
        VertexSet(1, 1 << 3)


def test_random_pairs_are_far_apart_n500():
    rng = np.random.default_rng(0)
    far = []
    for s in random_sigmas(500, 200, master=55):
        g = build(s)
        for _ in range(50):
            x, y = rng.choice(np.arange(-500, 501), 2, replace=False)
            far.append(distances_from(g, int(x))[y + 500] > 4)
    assert np.mean(far) >= 0.95
