"""The walk digraph G(n, sigma), its square, and set/path primitives on it.

Both graph types are regular multigraphs stored as an ``(N, d)`` array of 0-based
out-neighbour indices, one row per vertex, with parallel edges and self-loops kept.
"""
from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvariantError
from .perm import Permutation


@dataclass(frozen=True)
class VertexSet:
    """Subset of [-n, n]; bit ``x + n`` of ``mask`` marks vertex ``x``."""

    n: int
    mask: int = 0

    def __post_init__(self):
        if self.mask < 0 or self.mask >> (2 * self.n + 1):
            raise ValueError(f"mask has bits outside [-{self.n}, {self.n}]")

    @classmethod
    def of(cls, n: int, vertices: Iterable[int] = ()) -> "VertexSet":
        mask = 0
        for x in vertices:
            if not -n <= x <= n:
                raise ValueError(f"{x} is outside [-{n}, {n}]")
            mask |= 1 << (x + n)
        return cls(n, mask)

    @classmethod
    def full(cls, n: int) -> "VertexSet":
        return cls(n, (1 << (2 * n + 1)) - 1)

    @classmethod
    def from_bool(cls, n: int, flags) -> "VertexSet":
        mask = 0
        for i in np.flatnonzero(np.asarray(flags, dtype=bool)).tolist():
            mask |= 1 << i
        return cls(n, mask)

    def to_bool(self) -> np.ndarray:
        return np.array([(self.mask >> i) & 1 for i in range(2 * self.n + 1)], dtype=bool)

    def indices(self) -> list[int]:
        m, out, i = self.mask, [], 0
        while m:
            if m & 1:
                out.append(i)
            m >>= 1
            i += 1
        return out

    def vertices(self) -> list[int]:
        return [i - self.n for i in self.indices()]

    def size(self) -> int:
        return self.mask.bit_count()

    def __len__(self):
        return self.size()

    def __iter__(self):
        return iter(self.vertices())

    def __contains__(self, x: int) -> bool:
        return -self.n <= x <= self.n and bool((self.mask >> (x + self.n)) & 1)

    def _same(self, other: "VertexSet"):
        if other.n != self.n:
            raise ValueError("vertex sets live on different intervals")

    def __or__(self, other: "VertexSet") -> "VertexSet":
        self._same(other)
        return VertexSet(self.n, self.mask | other.mask)

    def __and__(self, other: "VertexSet") -> "VertexSet":
        self._same(other)
        return VertexSet(self.n, self.mask & other.mask)

    def __sub__(self, other: "VertexSet") -> "VertexSet":
        self._same(other)
        return VertexSet(self.n, self.mask & ~other.mask)

    def complement(self) -> "VertexSet":
        return VertexSet(self.n, VertexSet.full(self.n).mask & ~self.mask)

    def __repr__(self):
        return f"VertexSet(n={self.n}, {self.vertices()})"


class _RegularDigraph:
    """Shared behaviour of the d-regular multigraphs on [-n, n]."""

    n: int
    out_adj: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.n + 1

    @property
    def degree(self) -> int:
        return self.out_adj.shape[1]

    def out(self, x: int) -> list[int]:
        """Out-neighbours of vertex ``x`` with multiplicity, in slot order."""
        if not -self.n <= x <= self.n:
            raise ValueError(f"{x} is outside [-{self.n}, {self.n}]")
        return [int(v) - self.n for v in self.out_adj[x + self.n]]

    @cached_property
    def in_adj(self) -> np.ndarray:
        """``(N, d)`` array of in-neighbour indices, with multiplicity."""
        rows: list[list[int]] = [[] for _ in range(self.size)]
        for u, targets in enumerate(self.out_adj.tolist()):
            for v in targets:
                rows[v].append(u)
        if any(len(r) != self.degree for r in rows):
            raise InvariantError("in-degree differs from out-degree")
        return np.array(rows, dtype=np.int64)

    @cached_property
    def _out_masks(self) -> tuple[int, ...]:
        return tuple(sum({1 << v for v in row}) for row in self.out_adj.tolist())

    @cached_property
    def _out_lists(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(row) for row in self.out_adj.tolist())

    def edge_multiset(self) -> Counter:
        """Counter over ``(u, v)`` vertex pairs in [-n, n] coordinates."""
        c: Counter = Counter()
        for u, row in enumerate(self._out_lists):
            for v in row:
                c[(u - self.n, v - self.n)] += 1
        return c

    def to_edge_list(self) -> str:
        """Tab-separated ``u v m`` lines, sorted, under a ``# permwalk-digraph`` header."""
        lines = [f"# permwalk-digraph n={self.n}"]
        for (u, v), m in sorted(self.edge_multiset().items()):
            lines.append(f"{u}\t{v}\t{m}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class PermutedDigraph(_RegularDigraph):
    sigma: Permutation
    out_adj: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.sigma.n


@dataclass(frozen=True, eq=False)
class SquareDigraph(_RegularDigraph):
    n: int
    out_adj: np.ndarray = field(repr=False)


def walk_successor_indices(n: int) -> np.ndarray:
    """Pre-image slots: vertex ``x`` steps to sigma applied to these two points."""
    xs = np.arange(-n, n + 1)
    left = np.where(xs == -n, -n, xs - 1)
    right = np.where(xs == n, n, xs + 1)
    return np.stack([left, right], axis=1) + n


def build(sigma: Permutation) -> PermutedDigraph:
    n = sigma.n
    out_adj = sigma.index_array[walk_successor_indices(n)]
    out_adj.setflags(write=False)
    g = PermutedDigraph(sigma, out_adj)
    _ = g.in_adj  # raises on an in-degree defect
    if not is_strongly_connected(out_adj):
        raise InvariantError(f"G is not strongly connected for {sigma!r}")
    return g


def square(g: _RegularDigraph) -> SquareDigraph:
    # row x lists out(out(x)[0]) then out(out(x)[1])
    out_adj = g.out_adj[g.out_adj].reshape(g.size, -1)
    out_adj.setflags(write=False)
    return SquareDigraph(g.n, out_adj)


def strongly_connected_components(adj: Sequence[Sequence[int]] | Mapping) -> list[list]:
    """Tarjan's algorithm, iterative. ``adj`` maps each vertex to its successors.

    Accepts a mapping, or a sequence whose positions are the vertices 0..len-1.
    Components come out in reverse topological order.
    """
    if isinstance(adj, Mapping):
        nodes = list(adj)
        succ = adj
    else:
        nodes = list(range(len(adj)))
        succ = {i: list(adj[i]) for i in nodes}
        for targets in succ.values():
            for t in targets:
                if t not in succ:
                    raise ValueError(f"edge to unknown vertex {t}")

    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    comps: list[list] = []
    counter = 0

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                w = int(w) if isinstance(w, np.integer) else w
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def is_strongly_connected(adj) -> bool:
    if isinstance(adj, np.ndarray):
        adj = adj.tolist()
    comps = strongly_connected_components(adj)
    return len(comps) == 1


def _check(A: VertexSet, g: _RegularDigraph):
    if A.n != g.n:
        raise ValueError(f"vertex set on n={A.n} used with graph on n={g.n}")


def neighbors(A: VertexSet, g: _RegularDigraph) -> VertexSet:
    _check(A, g)
    masks = g._out_masks
    m = 0
    for i in A.indices():
        m |= masks[i]
    return VertexSet(g.n, m)


def boundary(A: VertexSet, g: _RegularDigraph) -> VertexSet:
    return neighbors(A, g) - A


def edges_out(A: VertexSet, g: _RegularDigraph) -> int:
    """Directed edges from A to its complement, counted with multiplicity."""
    _check(A, g)
    rows = g._out_lists
    mask = A.mask
    return sum(1 for i in A.indices() for v in rows[i] if not (mask >> v) & 1)


def plus_minus_one(A: VertexSet) -> VertexSet:
    """{x - 1, x + 1 : x in A} clipped to [-n, n]."""
    full = (1 << (2 * A.n + 1)) - 1
    return VertexSet(A.n, ((A.mask << 1) | (A.mask >> 1)) & full)


def component_counts(A: VertexSet) -> tuple[int, int]:
    """Numbers of maximal step-2 runs among the even and the odd elements of A."""
    k_even = k_odd = 0
    for x in A.vertices():
        if x - 2 not in A:
            if x % 2 == 0:
                k_even += 1
            else:
                k_odd += 1
    return k_even, k_odd


def _bfs_layers(g: _RegularDigraph, w: int, radius: int | None = None) -> list[int]:
    """Distances from ``w`` (index form); -1 for unreached."""
    dist = [-1] * g.size
    start = w + g.n
    dist[start] = 0
    rows = g._out_lists
    q = deque([start])
    while q:
        u = q.popleft()
        d = dist[u]
        if radius is not None and d >= radius:
            continue
        for v in rows[u]:
            if dist[v] < 0:
                dist[v] = d + 1
                q.append(v)
    return dist


def distance(g: _RegularDigraph, x: int, y: int) -> int:
    for v in (x, y):
        if not -g.n <= v <= g.n:
            raise ValueError(f"{v} is outside [-{g.n}, {g.n}]")
    d = _bfs_layers(g, x)[y + g.n]
    if d < 0:
        raise InvariantError(f"{y} unreachable from {x}")
    return d


def distances_from(g: _RegularDigraph, x: int) -> np.ndarray:
    """Directed distances from ``x`` to every vertex, in index order."""
    if not -g.n <= x <= g.n:
        raise ValueError(f"{x} is outside [-{g.n}, {g.n}]")
    return np.asarray(_bfs_layers(g, x), dtype=np.int64)


def ball(g: _RegularDigraph, w: int, r: int) -> VertexSet:
    if not -g.n <= w <= g.n:
        raise ValueError(f"{w} is outside [-{g.n}, {g.n}]")
    if r < 0:
        raise ValueError("radius must be nonnegative")
    dist = _bfs_layers(g, w, radius=r)
    mask = 0
    for i, d in enumerate(dist):
        if 0 <= d <= r:
            mask |= 1 << i
    return VertexSet(g.n, mask)
