"""Seeded trajectory simulation of the simple and lazy walks.

Run ``r`` under master seed ``s`` draws its bits from the counter stream keyed by
``(s, r)``: a simple step consumes one bit (which out-slot), a lazy step two (hold,
then out-slot) whether or not it holds. Batches therefore give the same per-run
results in any order or chunking.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.stats import binomtest

from .digraph import _RegularDigraph
from .markov import TransitionKernel
from .rng import RngSeed, stream_key, stream_word

_MODE_CODE = {"simple": 0, "lazy": 1}


def _mode(mode: str) -> int:
    try:
        return _MODE_CODE[mode]
    except KeyError:
        raise ValueError(f"mode must be 'simple' or 'lazy', got {mode!r}") from None


@numba.njit(cache=True)
def _bit(key, c):
    w = stream_word(key, np.uint64(c >> 6))
    return (w >> np.uint64(c & 63)) & np.uint64(1)


@numba.njit(cache=True)
def _step(out_adj, x, lazy, key, c):
    if lazy:
        hold = _bit(key, c)
        c += 1
        slot = _bit(key, c)
        c += 1
        if hold:
            return x, c
        return out_adj[x, slot], c
    slot = _bit(key, c)
    c += 1
    return out_adj[x, slot], c


@numba.njit(cache=True)
def _hit_batch(out_adj, start, is_target, lazy, master, first_run, runs, cap):
    times = np.empty(runs, dtype=np.int64)
    censored = np.zeros(runs, dtype=np.bool_)
    for r in range(runs):
        key = stream_key(master, first_run + np.uint64(r))
        x = start
        t = 0
        c = 0
        while not is_target[x] and t < cap:
            x, c = _step(out_adj, x, lazy, key, c)
            t += 1
        times[r] = t
        censored[r] = not is_target[x]
    return times, censored


@numba.njit(cache=True)
def _visit_batch(out_adj, start, y, horizon, lazy, master, first_run, runs):
    counts = np.empty(runs, dtype=np.int64)
    for r in range(runs):
        key = stream_key(master, first_run + np.uint64(r))
        x = start
        c = 0
        z = 1 if x == y else 0
        for _ in range(horizon):
            x, c = _step(out_adj, x, lazy, key, c)
            if x == y:
                z += 1
        counts[r] = z
    return counts


@numba.njit(cache=True)
def _trace(out_adj, start, lazy, key, length):
    out = np.empty(length + 1, dtype=np.int64)
    x = start
    c = 0
    out[0] = x
    for t in range(length):
        x, c = _step(out_adj, x, lazy, key, c)
        out[t + 1] = x
    return out


def _target_mask(g: _RegularDigraph, target) -> np.ndarray:
    items = [target] if isinstance(target, (int, np.integer)) else list(target)
    if not items:
        raise ValueError("target set is empty")
    mask = np.zeros(g.size, dtype=np.bool_)
    for y in items:
        if not -g.n <= y <= g.n:
            raise ValueError(f"target {y} is outside [-{g.n}, {g.n}]")
        mask[y + g.n] = True
    return mask


def default_step_cap(n: int) -> int:
    return 100 * (2 * n + 1) ** 2


@dataclass(frozen=True)
class HitResult:
    hit_time: int
    censored: bool
    trace_length: int


def simulate_hit(g, start: int, target, mode: str, seed: RngSeed, step_cap: int | None = None) -> HitResult:
    """One run; ``seed.stream_id`` is the run index under ``seed.master_seed``."""
    times, cens = simulate_hits(g, start, target, mode, seed.master_seed, 1, step_cap, first_run=seed.stream_id)
    return HitResult(int(times[0]), bool(cens[0]), int(times[0]))


def simulate_hits(g, start, target, mode, master_seed, runs, step_cap=None, first_run=0):
    """Hit times of ``runs`` independent runs (run indices first_run, first_run+1, ...)."""
    if step_cap is None:
        step_cap = default_step_cap(g.n)
    if step_cap < 1:
        raise ValueError("step_cap must be at least 1")
    if not -g.n <= start <= g.n:
        raise ValueError(f"start {start} is outside [-{g.n}, {g.n}]")
    mask = _target_mask(g, target)
    out_adj = np.ascontiguousarray(g.out_adj, dtype=np.int64)
    return _hit_batch(out_adj, start + g.n, mask, _mode(mode), np.uint64(master_seed), np.uint64(first_run), int(runs), int(step_cap))


def visit_count(g, start: int, y: int, horizon: int, mode: str, seed: RngSeed) -> int:
    return int(visit_counts(g, start, y, horizon, mode, seed.master_seed, 1, first_run=seed.stream_id)[0])


def visit_counts(g, start, y, horizon, mode, master_seed, runs, first_run=0) -> np.ndarray:
    """Visits to ``y`` over times 0..horizon, one entry per run."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    for v in (start, y):
        if not -g.n <= v <= g.n:
            raise ValueError(f"{v} is outside [-{g.n}, {g.n}]")
    out_adj = np.ascontiguousarray(g.out_adj, dtype=np.int64)
    return _visit_batch(out_adj, start + g.n, y + g.n, int(horizon), _mode(mode), np.uint64(master_seed), np.uint64(first_run), int(runs))


@dataclass(frozen=True)
class ProportionEstimate:
    estimate: float
    low: float
    high: float
    successes: int
    runs: int


def hit_probability(g, start: int, y, horizon: int, mode: str, seed: RngSeed, runs: int) -> ProportionEstimate:
    """Fraction of runs hitting ``y`` within ``horizon`` steps, with a Wilson 95% interval."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    # a run censored at the horizon has not hit by then; cap >= 1 keeps start-in-target at 0
    times, cens = simulate_hits(g, start, y, mode, seed.master_seed, runs, max(horizon, 1), seed.stream_id)
    hits = int(np.count_nonzero(~cens & (times <= horizon)))
    ci = binomtest(hits, runs).proportion_ci(confidence_level=0.95, method="wilson")
    return ProportionEstimate(hits / runs, float(ci.low), float(ci.high), hits, runs)


@dataclass(frozen=True, eq=False)
class WalkTrace:
    start: int
    mode: str
    steps: np.ndarray = field(repr=False)  # vertices in [-n, n], steps[0] == start
    seed: RngSeed


def simulate_trace(g, start: int, mode: str, seed: RngSeed, length: int) -> WalkTrace:
    key = np.uint64(seed.key)
    out_adj = np.ascontiguousarray(g.out_adj, dtype=np.int64)
    path = _trace(out_adj, start + g.n, _mode(mode), key, int(length)) - g.n
    return WalkTrace(start, mode, path, seed)


def trace_is_valid(trace: WalkTrace, k: TransitionKernel) -> bool:
    """Every consecutive pair is a positive-probability transition of ``k``."""
    P = k.matrix
    idx = trace.steps + k.n
    return bool(np.all(np.asarray(P[idx[:-1], idx[1:]]).ravel() > 0))


def runs_to_csv(start: int, target, mode: str, times, censored, first_run: int = 0) -> str:
    from .markov import target_label

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run_index", "start", "target", "mode", "hit_time", "censored"])
    label = target_label(target)
    for i, (t, c) in enumerate(zip(np.asarray(times).tolist(), np.asarray(censored).tolist())):
        w.writerow([first_run + i, start, label, mode, t, int(c)])
    return buf.getvalue()


def tail_decay_rate(g, start: int, y, mode: str, master_seed: int, runs: int, block: int, j_max: int):
    """Fit P(tau > j * block) ~ c * rate**j over j = 1..j_max by least squares on logs.

    Returns ``(rate, survival)`` where ``survival[j-1]`` is the empirical tail at j.
    """
    cap = block * j_max + 1
    times, cens = simulate_hits(g, start, y, mode, master_seed, runs, cap)
    js = np.arange(1, j_max + 1)
    surv = np.array([np.mean(cens | (times > j * block)) for j in js])
    ok = surv > 0
    if ok.sum() < 2:
        return 0.0, surv
    slope = np.polyfit(js[ok], np.log(surv[ok]), 1)[0]
    return float(np.exp(slope)), surv
