"""Exact Markov-chain quantities for the simple and lazy walks on G(n, sigma).

Kernel powers are never formed; everything that depends on P^t comes from pushing
distribution vectors (or a batch of them) through the sparse kernel.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .digraph import PermutedDigraph, _RegularDigraph
from .errors import ConvergenceError, InvariantError

MODES = ("simple", "lazy")
DIRECT_SOLVE_MAX_STATES = 2001
RESIDUAL_TOL = 1e-10
ROW_UPDATE_CAP = 10**7


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    n: int
    mode: str
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def size(self) -> int:
        return 2 * self.n + 1

    def row(self, x: int) -> list[tuple[int, float]]:
        """``(target, probability)`` pairs of row ``x``, sorted by target."""
        if not -self.n <= x <= self.n:
            raise ValueError(f"{x} is outside [-{self.n}, {self.n}]")
        i = x + self.n
        lo, hi = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        pairs = zip(self.matrix.indices[lo:hi].tolist(), self.matrix.data[lo:hi].tolist())
        return sorted((j - self.n, p) for j, p in pairs)

    def prob(self, x: int, y: int) -> float:
        return float(self.matrix[x + self.n, y + self.n])

    def step(self, dist: np.ndarray) -> np.ndarray:
        """One step of a row distribution (or a batch of them as rows)."""
        return np.asarray(dist @ self.matrix)

    @property
    def transposed(self) -> sp.csr_matrix:
        if "_pt" not in self.__dict__:
            object.__setattr__(self, "_pt", self.matrix.T.tocsr())
        return self.__dict__["_pt"]


def kernel(g: _RegularDigraph, mode: str = "simple") -> TransitionKernel:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    N, d = g.out_adj.shape
    rows = np.repeat(np.arange(N), d)
    cols = g.out_adj.reshape(-1)
    vals = np.full(N * d, 1.0 / d)
    if mode == "lazy":
        rows = np.concatenate([np.arange(N), rows])
        cols = np.concatenate([np.arange(N), cols])
        vals = np.concatenate([np.full(N, 0.5), vals / 2])
    # coo -> csr sums duplicate (row, col) entries, merging parallel edges
    P = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
    P.sum_duplicates()
    P.sort_indices()
    k = TransitionKernel(g.n, mode, P)
    check_kernel(k)
    return k


def check_kernel(k: TransitionKernel, tol: float = 1e-12) -> None:
    P = k.matrix
    rs = np.asarray(P.sum(axis=1)).ravel()
    if np.max(np.abs(rs - 1.0)) > tol:
        raise InvariantError("kernel rows do not sum to one")
    pi = np.full(k.size, 1.0 / k.size)
    if np.max(np.abs(pi @ P - pi)) > tol:
        raise InvariantError("uniform law is not stationary")


def _target_indices(k: TransitionKernel, target) -> np.ndarray:
    items = [target] if isinstance(target, (int, np.integer)) else list(target)
    if not items:
        raise ValueError("target set is empty")
    for y in items:
        if not -k.n <= y <= k.n:
            raise ValueError(f"target {y} is outside [-{k.n}, {k.n}]")
    return np.unique(np.asarray(items, dtype=np.int64) + k.n)


def target_label(target) -> str:
    if isinstance(target, (int, np.integer)):
        return str(int(target))
    return "set:" + ",".join(str(int(y)) for y in sorted(target))


@dataclass(frozen=True, eq=False)
class HittingTable:
    n: int
    target: tuple[int, ...]
    mode: str
    values: np.ndarray = field(repr=False)
    residual: float = 0.0

    def __getitem__(self, x: int) -> float:
        return float(self.values[x + self.n])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["start", "target", "mode", "expected_steps", "residual"])
        label = target_label(self.target[0] if len(self.target) == 1 else self.target)
        for i, h in enumerate(self.values.tolist()):
            w.writerow([i - self.n, label, self.mode, repr(h), repr(self.residual)])
        return buf.getvalue()


@numba.njit(cache=True)
def _gauss_seidel(indptr, indices, data, free, tol, cap):
    """Solve h = 1 + P h on free states (h = 0 elsewhere) by Gauss-Seidel sweeps."""
    N = free.shape[0]
    h = np.zeros(N)
    updates = 0
    residual = np.inf
    while updates < cap:
        for i in range(N):
            if not free[i]:
                continue
            s = 1.0
            diag = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j == i:
                    diag += data[p]
                elif free[j]:
                    s += data[p] * h[j]
            h[i] = s / (1.0 - diag)
            updates += 1
        residual = 0.0
        scale = 0.0
        for i in range(N):
            if not free[i]:
                continue
            r = h[i] - 1.0
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if free[j]:
                    r -= data[p] * h[j]
            residual = max(residual, abs(r))
            scale = max(scale, abs(h[i]))
        if residual <= max(tol, 64 * 2.220446049250313e-16 * scale):
            return h, residual, True
    return h, residual, False


def _residual_tol(h: np.ndarray, tol: float) -> float:
    # below ~eps*|h| the residual is rounding noise of its own evaluation
    return max(tol, 64 * np.finfo(float).eps * float(np.max(np.abs(h), initial=1.0)))


def hitting_times(
    k: TransitionKernel,
    target,
    method: str = "auto",
    tol: float = RESIDUAL_TOL,
) -> HittingTable:
    """Expected hitting times of ``target`` (vertex or iterable of vertices) from every start."""
    tgt = _target_indices(k, target)
    N = k.size
    free = np.ones(N, dtype=bool)
    free[tgt] = False
    keep = np.flatnonzero(free)
    if method == "auto":
        method = "direct" if N <= DIRECT_SOLVE_MAX_STATES else "gauss-seidel"

    h = np.zeros(N)
    residual = 0.0
    if keep.size:
        Q = k.matrix[keep][:, keep]
        A = (sp.identity(keep.size, format="csc") - Q).tocsc()
        ones = np.ones(keep.size)
        if method == "direct":
            lu = spla.splu(A)
            hk = lu.solve(ones)
            for _ in range(3):
                r = ones - A @ hk
                residual = float(np.max(np.abs(r)))
                if residual <= _residual_tol(hk, tol):
                    break
                hk = hk + lu.solve(r)
            residual = float(np.max(np.abs(ones - A @ hk)))
        elif method == "gauss-seidel":
            P = k.matrix
            hfull, residual, ok = _gauss_seidel(P.indptr, P.indices, P.data, free, tol, ROW_UPDATE_CAP)
            if not ok:
                raise ConvergenceError("Gauss-Seidel hit its row-update cap", residual)
            hk = hfull[keep]
            residual = float(np.max(np.abs(ones - A @ hk)))
        else:
            raise ValueError(f"unknown method {method!r}")
        if not residual <= _residual_tol(hk, tol):
            raise ConvergenceError("hitting-time solve missed tolerance", residual)
        h[keep] = hk
    if np.any(h < 0) or not np.all(np.isfinite(h)):
        raise InvariantError("hitting times must be finite and nonnegative")
    targets = tuple(int(i) - k.n for i in tgt)
    return HittingTable(k.n, targets, k.mode, h, residual)


def all_pairs_hitting(k: TransitionKernel) -> np.ndarray:
    """``H[x, y] = E_x(tau_y)`` in index form, via the fundamental matrix.

    With pi uniform, Z = (I - P + 1 pi^T)^(-1) and E_x(tau_y) = (Z[y,y] - Z[x,y]) / pi(y).
    """
    N = k.size
    A = np.eye(N) - k.matrix.toarray() + 1.0 / N
    Z = np.linalg.solve(A, np.eye(N))
    H = (np.diag(Z)[None, :] - Z) * N
    np.fill_diagonal(H, 0.0)
    return H


@dataclass(frozen=True)
class WorstCase:
    value: float
    start: int
    target: int


def _argmax_pair(H: np.ndarray, n: int, rtol: float = 1e-9) -> WorstCase:
    top = float(H.max())
    tied = np.argwhere(H >= top - rtol * max(1.0, abs(top)))
    # H is indexed [x, y]; order ties by target first, then start
    x, y = min(map(tuple, tied.tolist()), key=lambda p: (p[1], p[0]))
    return WorstCase(top, x - n, y - n)


def worst_case_hitting(k: TransitionKernel, method: str = "solve") -> WorstCase:
    """Maximum of E_x(tau_y) over ordered pairs, ties to smallest target then start.

    ``method="solve"`` runs one sparse solve per target; ``"fundamental"`` uses the
    dense all-pairs formula, which is much faster for many targets.
    """
    if method == "solve":
        H = np.empty((k.size, k.size))
        for y in range(-k.n, k.n + 1):
            H[:, y + k.n] = hitting_times(k, y).values
    elif method == "fundamental":
        H = all_pairs_hitting(k)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _argmax_pair(H, k.n)


# -- occupation measures -------------------------------------------------------------


def transition_series(k: TransitionKernel, x: int, y: int, horizon: int) -> np.ndarray:
    """``[P^t(x, y) for t in 0..horizon]``."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    mu = np.zeros(k.size)
    mu[x + k.n] = 1.0
    out = np.empty(horizon + 1)
    out[0] = mu[y + k.n]
    for t in range(1, horizon + 1):
        mu = k.step(mu)
        out[t] = mu[y + k.n]
    return out


def greens_function(k: TransitionKernel, x: int, y: int, horizon: int) -> float:
    """Expected visits to y during times 0..horizon starting from x."""
    return float(transition_series(k, x, y, horizon).sum())


def greens_matrix(k: TransitionKernel, horizon: int) -> np.ndarray:
    """All pairs at once: ``G[x, y]`` summed over t in 0..horizon."""
    D = np.eye(k.size)
    G = D.copy()
    PT = k.transposed
    for _ in range(horizon):
        D = PT @ D
        G += D
    return G.T


def visit_second_moment(k: TransitionKernel, x: int, y: int, horizon: int) -> float:
    """E_x of the squared visit count to y over times 0..horizon.

    Uses E[Z^2] = sum_i a_i + 2 sum_{i<j} a_i b_{j-i} with a_t = P^t(x,y), b_t = P^t(y,y).
    """
    a = transition_series(k, x, y, horizon)
    b = transition_series(k, y, y, horizon)
    # prefix[m] = sum_{s=1}^{m} b_s
    prefix = np.concatenate([[0.0], np.cumsum(b[1:])])
    cross = float(np.dot(a, prefix[horizon - np.arange(horizon + 1)]))
    return float(a.sum()) + 2.0 * cross


# -- mixing ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MixingProfile:
    n: int
    mode: str
    tv: np.ndarray = field(repr=False)  # shape (T+1, N): d_TV(P^t(x, .), pi)
    linf: np.ndarray = field(repr=False)  # shape (T+1,)
    t_mix: int | None

    @property
    def max_tv(self) -> np.ndarray:
        return self.tv.max(axis=1)

    @property
    def t_max(self) -> int:
        return len(self.linf) - 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "max_tv", "linf", "t_mix_flag"])
        for t, (m, l) in enumerate(zip(self.max_tv.tolist(), self.linf.tolist())):
            w.writerow([t, repr(m), repr(l), int(self.t_mix is not None and t >= self.t_mix)])
        return buf.getvalue()


def mixing_profile(k: TransitionKernel, t_max: int, stop_at_mix: bool = False) -> MixingProfile:
    """TV and sup-norm distance to uniform from every start, for t = 0..t_max.

    t_mix is the first t with max_x d_TV < 1/4, or None if not reached by t_max.
    """
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    N = k.size
    pi = 1.0 / N
    D = np.eye(N)  # column x holds P^t(x, .)
    PT = k.transposed
    tv_rows, linf = [], []
    t_mix = None
    for t in range(t_max + 1):
        if t:
            D = PT @ D
        dev = np.abs(D - pi)
        tv_rows.append(0.5 * dev.sum(axis=0))
        linf.append(dev.max())
        if t_mix is None and tv_rows[-1].max() < 0.25:
            t_mix = t
            if stop_at_mix:
                break
    return MixingProfile(k.n, k.mode, np.array(tv_rows), np.array(linf), t_mix)


def sup_bound_pass_rate(profile: MixingProfile, alpha: float) -> float:
    """Fraction of t at which the sup deviation sits below (1 - alpha^2/2)^t."""
    if profile.mode != "lazy":
        raise ValueError("the sup-norm mixing bound concerns the lazy walk")
    t = np.arange(len(profile.linf))
    bound = (1.0 - alpha**2 / 2.0) ** t
    return float(np.mean(profile.linf <= bound + 1e-15))


def survival_probability(k: TransitionKernel, y, steps: int, init: np.ndarray | None = None) -> float:
    """P_init(tau_y >= steps): mass avoiding ``y`` at every time 0..steps-1.

    ``init`` defaults to the uniform law.
    """
    tgt = _target_indices(k, y)
    mu = np.full(k.size, 1.0 / k.size) if init is None else np.array(init, dtype=float)
    if steps <= 0:
        return float(mu.sum())
    mu[tgt] = 0.0
    for _ in range(steps - 1):
        mu = k.step(mu)
        mu[tgt] = 0.0
    return float(mu.sum())


def hitting_tail(k: TransitionKernel, y, checkpoints: Iterable[int], init: np.ndarray | None = None) -> np.ndarray:
    """P_init(tau_y > t) for each t in ``checkpoints`` (ascending)."""
    tgt = _target_indices(k, y)
    mu = np.full(k.size, 1.0 / k.size) if init is None else np.array(init, dtype=float)
    mu[tgt] = 0.0
    out, t = [], 0
    for c in checkpoints:
        while t < c:
            mu = k.step(mu)
            mu[tgt] = 0.0
            t += 1
        out.append(mu.sum())
    return np.array(out)


def exit_time_from_origin(g: PermutedDigraph, mode: str = "simple") -> float:
    """E_0(tau_{-n, n})."""
    k = kernel(g, mode)
    return hitting_times(k, (-g.n, g.n))[0]
