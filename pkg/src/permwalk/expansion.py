"""Bottleneck ratios of the walk digraphs and the counting bounds behind expansion.

For a d-regular Eulerian digraph with uniform stationary law the bottleneck ratio
of S is ``edges_out(S) / (d |S|)``; everything here works with that integer form
and only converts to floats at the edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np
from scipy.special import gammaln, logsumexp

from .digraph import VertexSet, _RegularDigraph, boundary, edges_out, square
from .errors import UnsupportedSizeError
from .rng import RngSeed

N_MAX_EXACT = 11


@dataclass(frozen=True)
class BottleneckWitness:
    set: VertexSet
    edges_out: int
    degree: int = 2
    method: str = "exact"

    @property
    def phi(self) -> Fraction:
        return Fraction(self.edges_out, self.degree * self.set.size())

    @property
    def phi_lazy(self) -> Fraction:
        """Same set under the lazy walk: holding halves Q and leaves pi alone."""
        return self.phi / 2

    @property
    def pi_S(self) -> float:
        return self.set.size() / (2 * self.set.n + 1)

    def to_dict(self, sigma_seed=None) -> dict:
        return {
            "n": self.set.n,
            "sigma_seed": sigma_seed,
            "graph": "G" if self.degree == 2 else "G2",
            "phi": float(self.phi),
            "edges_out": self.edges_out,
            "set": self.set.vertices(),
            "method": self.method,
        }


def phi(A: VertexSet, g: _RegularDigraph) -> BottleneckWitness:
    if A.size() == 0 or A.size() == g.size:
        raise ValueError("bottleneck ratio needs a nonempty proper subset")
    return BottleneckWitness(A, edges_out(A, g), g.degree, "given")


@numba.njit(cache=True)
def _gray_min_cut(out_adj, in_adj, max_size):
    N, d = out_adj.shape
    in_s = np.zeros(N, dtype=np.bool_)
    size = 0
    e = 0
    mask = 0
    best_e = -1
    best_s = 1
    best_mask = 0
    for i in range(1, 1 << N):
        # bit to flip: index of the lowest set bit of i
        v = 0
        t = i
        while (t & 1) == 0:
            t >>= 1
            v += 1
        out_free = 0
        for k in range(d):
            w = out_adj[v, k]
            if w != v and not in_s[w]:
                out_free += 1
        in_from = 0
        for k in range(d):
            u = in_adj[v, k]
            if u != v and in_s[u]:
                in_from += 1
        if in_s[v]:
            e += in_from - out_free
            in_s[v] = False
            size -= 1
        else:
            e += out_free - in_from
            in_s[v] = True
            size += 1
        mask ^= 1 << v
        if 1 <= size <= max_size:
            lhs = e * best_s
            rhs = best_e * size
            if best_e < 0 or lhs < rhs or (lhs == rhs and mask < best_mask):
                best_e = e
                best_s = size
                best_mask = mask
    return best_e, best_mask


def phi_star_exact(g: _RegularDigraph, n_max: int = N_MAX_EXACT) -> BottleneckWitness:
    """Exact minimum bottleneck ratio over nonempty S with |S| <= n.

    Ties go to the set with the smallest bitmask (bit 0 is vertex -n).
    """
    if g.n > n_max:
        raise UnsupportedSizeError(
            f"exhaustive search is limited to n <= {n_max}; use phi_star_search for n={g.n}"
        )
    out_adj = np.ascontiguousarray(g.out_adj, dtype=np.int64)
    in_adj = np.ascontiguousarray(g.in_adj, dtype=np.int64)
    best_e, best_mask = _gray_min_cut(out_adj, in_adj, g.n)
    return BottleneckWitness(VertexSet(g.n, int(best_mask)), int(best_e), g.degree, "exact")


def _flip_deltas(in_s, out_adj, in_adj, idx):
    self_out = out_adj == idx[:, None]
    self_in = in_adj == idx[:, None]
    out_free = (~in_s[out_adj] & ~self_out).sum(axis=1)
    in_from = (in_s[in_adj] & ~self_in).sum(axis=1)
    return np.where(in_s, in_from - out_free, out_free - in_from)


def _cut_size(in_s, out_adj):
    return int((in_s[:, None] & ~in_s[out_adj]).sum())


def _better(e1, s1, e2, s2) -> bool:
    return e1 * s2 < e2 * s1


def _local_search(in_s, out_adj, in_adj, max_size):
    N = len(in_s)
    idx = np.arange(N)
    e = _cut_size(in_s, out_adj)
    s = int(in_s.sum())
    while True:
        delta = _flip_deltas(in_s, out_adj, in_adj, idx)
        new_s = np.where(in_s, s - 1, s + 1)
        new_e = e + delta
        ok = (new_s >= 1) & (new_s <= max_size)
        # cross-multiplied comparison keeps the ordering exact
        gain = new_e * s - e * new_s
        gain = np.where(ok, gain, np.iinfo(np.int64).max)
        v = int(np.argmin(gain))
        if gain[v] < 0:
            in_s[v] = not in_s[v]
            e, s = int(new_e[v]), int(new_s[v])
            continue
        # no improving flip: try swapping a member out and a non-member in
        swapped = False
        for u in np.flatnonzero(in_s).tolist():
            trial = in_s.copy()
            trial[u] = False
            e_u = e + int(delta[u])
            d2 = _flip_deltas(trial, out_adj, in_adj, idx)
            cand = np.flatnonzero(~trial)
            cand = cand[cand != u]
            if cand.size == 0:
                continue
            e_new = e_u + d2[cand]
            w = int(cand[np.argmin(e_new)])
            if _better(e_u + int(d2[w]), s, e, s):
                trial[w] = True
                in_s[:] = trial
                e = e_u + int(d2[w])
                swapped = True
                break
        if not swapped:
            return e, s


def phi_star_search(g: _RegularDigraph, seed: RngSeed, budget: int = 20) -> BottleneckWitness:
    """Upper bound on the minimum bottleneck ratio by restarted local search.

    Start sets: the two half-intervals, then ``budget`` random starts (half random
    subsets, half BFS balls). Each start is improved by greedy single-vertex flips
    and member/non-member swaps. Never claimed exact.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    n, N = g.n, g.size
    out_adj = np.asarray(g.out_adj, dtype=np.int64)
    in_adj = np.asarray(g.in_adj, dtype=np.int64)
    rng = seed.generator()

    starts = []
    left = np.zeros(N, dtype=bool)
    left[:n] = True
    starts.append(left)
    starts.append(left[::-1].copy())
    for r in range(budget):
        size = int(rng.integers(1, n + 1))
        if r % 2 == 0:
            s = np.zeros(N, dtype=bool)
            s[rng.choice(N, size=size, replace=False)] = True
        else:
            s = _bfs_prefix(out_adj, int(rng.integers(N)), size)
        starts.append(s)

    best = None
    for s in starts:
        e, k = _local_search(s, out_adj, in_adj, n)
        mask = int(sum(1 << int(i) for i in np.flatnonzero(s)))
        if best is None or _better(e, k, best[0], best[1]) or (
            e * best[1] == best[0] * k and mask < best[2]
        ):
            best = (e, k, mask)
    return BottleneckWitness(VertexSet(n, best[2]), best[0], g.degree, "search")


def _bfs_prefix(out_adj, start, size):
    seen = np.zeros(len(out_adj), dtype=bool)
    seen[start] = True
    order = [start]
    i = 0
    while len(order) < size and i < len(order):
        for v in out_adj[order[i]].tolist():
            if not seen[v] and len(order) < size:
                seen[v] = True
                order.append(v)
        i += 1
    return seen


def comp12_check(A: VertexSet, g: _RegularDigraph, g2: _RegularDigraph | None = None) -> bool:
    """Whether the square-graph boundary of A is at most three times its boundary in g."""
    if g2 is None:
        g2 = square(g)
    return boundary(A, g2).size() <= 3 * boundary(A, g).size()


def sandwich_check(A: VertexSet, g: _RegularDigraph) -> bool:
    """|dA|/(2|A|) <= Phi(A) <= |dA|/|A|, compared exactly."""
    w = phi(A, g)
    b = boundary(A, g).size()
    a = A.size()
    return Fraction(b, 2 * a) <= w.phi <= Fraction(b, a)


# -- counting bounds -------------------------------------------------------------


@dataclass(frozen=True)
class LogValue:
    """A nonnegative quantity held as its natural log; ``value`` is inf on overflow."""

    log: float

    @property
    def value(self) -> float:
        if self.log > 709.0:
            return math.inf
        return math.exp(self.log)


def _exact_eps(eps) -> Fraction:
    # decimal reading of eps so floor(2*eps*m) is not at the mercy of binary rounding
    return Fraction(str(eps)) if isinstance(eps, float) else Fraction(eps)


def _log_binom(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)


def _bound_args(n: int, m: int, eps):
    e = _exact_eps(eps)
    if e <= 0:
        raise ValueError("eps must be positive")
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    k = math.floor(2 * e * m)
    top = math.floor(m * (1 + 2 * e))
    if k > 2 * n + 1:
        raise ValueError("2*eps*m exceeds the interval size")
    return k, top


def counting_bound(n: int, m: int, eps) -> LogValue:
    """C(2n+1, floor(2 eps m)) * C(floor(m(1+2eps)), m): sets of size m with few runs."""
    k, top = _bound_args(n, m, eps)
    return LogValue(float(_log_binom(2 * n + 1, k) + _log_binom(top, m)))


def ratio_bound(n: int, m: int, eps) -> LogValue:
    """counting_bound divided by C(2n+1, m)."""
    k, top = _bound_args(n, m, eps)
    return LogValue(float(_log_binom(2 * n + 1, k) + _log_binom(top, m) - _log_binom(2 * n + 1, m)))


def union_bound_sum(n: int, eps, variant: str = "quartic") -> LogValue:
    """Union-bound series evaluated in log space.

    ``variant="quartic"``:  sum_{m=1}^{n/2} C(n, floor(eps m))^4 / C(n, m)
    ``variant="interval"``: sum_{m=1}^{n} C(2n+1, floor(2 eps m))^2 C(floor(m(1+2eps)), m)^2 / C(2n+1, m)
    """
    e = _exact_eps(eps)
    if not 0 < e < Fraction(1, 8):
        raise ValueError("eps must lie in (0, 1/8)")
    if n < 2:
        raise ValueError("n must be at least 2")
    num, den = e.numerator, e.denominator
    if variant == "quartic":
        m = np.arange(1, n // 2 + 1, dtype=np.int64)
        k = (m * num) // den
        logs = 4 * _log_binom(n, k) - _log_binom(n, m)
    elif variant == "interval":
        m = np.arange(1, n + 1, dtype=np.int64)
        k = (2 * m * num) // den
        top = m + (2 * m * num) // den
        logs = 2 * _log_binom(2 * n + 1, k) + 2 * _log_binom(top, m) - _log_binom(2 * n + 1, m)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return LogValue(float(logsumexp(logs)))
