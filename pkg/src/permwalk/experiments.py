"""Seeded experiments over uniform random permutations, with deterministic reports.

Every experiment fans out over (n, sigma-index) work items. Item ``(n, i)`` samples
its permutation from stream ``(n << 32) | i`` of the master seed, so results do
not depend on how items are scheduled; aggregation always runs in item order.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .digraph import build, distances_from
from .errors import BoundViolation
from .expansion import N_MAX_EXACT, phi_star_exact, phi_star_search, union_bound_sum
from .markov import (
    hitting_times,
    kernel,
    mixing_profile,
    sup_bound_pass_rate,
    survival_probability,
    worst_case_hitting,
)
from .perm import Permutation, all_permutations, identity, sample_uniform, shift_fixed_points
from .rng import RngSeed

log = logging.getLogger(__name__)

REPORT_TAG = "permwalk-report v1"
PAIR_STREAM = 1 << 62
SEARCH_STREAM = 1 << 61

DEFAULT_THRESHOLDS = {
    "linear-hitting": {"ratio_low": 0.7, "ratio_high": 1.4, "quantile": 0.95, "identity_ratio_low": 1.8, "identity_ratio_high": 2.2},
    "lower-bound": {"pass_fraction": 0.95, "divisor": 18},
    "universal-bound": {},
    "expansion": {"quantile": 0.05},
    "mixing-distance": {"tmix_ratio_max": 2.0, "distance_pass_fraction": 0.95, "distance_k": 4, "survival_bound": 0.5},
}

EXPERIMENTS: dict[str, Callable] = {}


def _experiment(name):
    def deco(fn):
        EXPERIMENTS[name] = fn
        return fn

    return deco


@dataclass
class ExperimentConfig:
    experiment: str
    n_values: list[int]
    num_sigmas: int = 20
    master_seed: int = 0
    pairs_per_sigma: int = 50
    horizon_factor: float = 1.0
    eps: float = 0.005
    thresholds: dict = field(default_factory=dict)
    out: str | None = None
    exhaustive: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}")
        if not self.n_values or any(not isinstance(n, int) or n < 1 for n in self.n_values):
            raise ValueError("n_values must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ValueError("n_values must be strictly increasing")
        for name in ("num_sigmas", "pairs_per_sigma"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 0 <= self.master_seed < 1 << 64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        merged = dict(DEFAULT_THRESHOLDS[self.experiment])
        merged.update(self.thresholds)
        self.thresholds = merged

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d

    def sigma_seed(self, n: int, i: int) -> RngSeed:
        return RngSeed(self.master_seed, (n << 32) | i)


# -- scheduling -------------------------------------------------------------------


def run_items(fn, items: list, jobs: int = 1) -> list:
    """``[fn(item) for item in items]``, optionally across processes; order preserved."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


# -- small statistics helpers -------------------------------------------------------


def _quantile(values, q) -> float:
    # "linear" interpolation is numpy's default; named here so reports can cite it
    return float(np.quantile(np.asarray(values, dtype=float), q, method="linear"))


def _stat(value, estimator: str, sample_size: int, **extra) -> dict:
    out = {"value": value, "estimator": estimator, "sample_size": sample_size}
    out.update(extra)
    return out


def _check(name: str, kind: str, passed: bool, **extra) -> dict:
    assert kind in ("hard", "statistical", "recorded")
    out = {"name": name, "kind": kind, "passed": bool(passed)}
    out.update(extra)
    return out


def _seed_dict(seed: RngSeed | None) -> dict | None:
    return None if seed is None else {"master_seed": seed.master_seed, "stream_id": seed.stream_id}


# -- linear-hitting ---------------------------------------------------------------


def _linear_item(args):
    cfg, n, i = args
    if i < 0:
        sigma, seed = identity(n), None
    else:
        seed = RngSeed(cfg["master_seed"], (n << 32) | i)
        sigma = sample_uniform(n, seed)
    k = kernel(build(sigma))
    try:
        wc = worst_case_hitting(k, method=cfg["params"].get("method", "fundamental"))
    except Exception as exc:  # recorded per sigma, the run continues
        return {"n": n, "index": i, "seed": _seed_dict(seed), "error": str(exc)}
    return {
        "n": n,
        "index": i,
        "seed": _seed_dict(seed),
        "worst_hitting": wc.value,
        "worst_over_n": wc.value / n,
        "argmax_start": wc.start,
        "argmax_target": wc.target,
        "shift_fixed_points": shift_fixed_points(sigma),
    }


@_experiment("linear-hitting")
def exp_linear_hitting(config: ExperimentConfig, jobs: int = 1) -> dict:
    """Worst-case expected hitting time E^sigma over sigma, per n, with identity control."""
    cfg = config.echo()
    th = config.thresholds
    items = [(cfg, n, i) for n in config.n_values for i in [-1, *range(config.num_sigmas)]]
    results = run_items(_linear_item, items, jobs)
    records = [r for r in results if r["index"] >= 0]
    ident = {r["n"]: r for r in results if r["index"] < 0}

    aggregates, checks, quantile_rows = [], [], []
    c_hat = {}
    for n in config.n_values:
        vals = [r["worst_over_n"] for r in records if r["n"] == n and "error" not in r]
        errors = sum(1 for r in records if r["n"] == n and "error" in r)
        q05, q50, q95 = (_quantile(vals, q) for q in (0.05, 0.5, th["quantile"]))
        c_hat[n] = q95
        e_id = ident[n]["worst_hitting"]
        forms = {"4n^2+4n": 4 * n * n + 4 * n, "4n^2+2n": 4 * n * n + 2 * n}
        aggregates.append(
            {
                "n": n,
                "c_hat": _stat(q95, f"empirical {th['quantile']} quantile of E/n", len(vals)),
                "median_over_n": _stat(q50, "empirical median of E/n", len(vals)),
                "q05_over_n": _stat(q05, "empirical 0.05 quantile of E/n", len(vals)),
                "solver_errors": errors,
                "identity_worst": e_id,
                "identity_argmax": [ident[n]["argmax_start"], ident[n]["argmax_target"]],
                "identity_closed_forms": forms,
                # reported, not asserted: which candidate closed form the exact solve agrees with
                "identity_closed_form_match": [k for k, v in forms.items() if abs(v - e_id) <= 1e-6 * v],
            }
        )
        quantile_rows.append({"n": n, "quantile05": q05, "quantile50": q50, "quantile95": q95})

    for a, b in zip(config.n_values, config.n_values[1:]):
        if b != 2 * a:
            continue
        ratio = c_hat[b] / c_hat[a]
        checks.append(
            _check(
                f"c_hat_doubling_{a}_{b}",
                "statistical",
                th["ratio_low"] <= ratio <= th["ratio_high"],
                value=ratio,
                band=[th["ratio_low"], th["ratio_high"]],
                estimator="ratio of empirical quantiles",
                sample_size=config.num_sigmas,
            )
        )
        id_ratio = (ident[b]["worst_hitting"] / b) / (ident[a]["worst_hitting"] / a)
        checks.append(
            _check(
                f"identity_doubling_{a}_{b}",
                "statistical",
                th["identity_ratio_low"] <= id_ratio <= th["identity_ratio_high"],
                value=id_ratio,
                band=[th["identity_ratio_low"], th["identity_ratio_high"]],
                estimator="exact ratio for the identity",
                sample_size=1,
            )
        )
    return {
        "records": records,
        "aggregates": aggregates,
        "checks": checks,
        "extra_csv": {"quantiles.csv": quantile_rows},
    }


# -- lower-bound --------------------------------------------------------------------


def _lower_item(args):
    cfg, n, i = args
    seed = RngSeed(cfg["master_seed"], (n << 32) | i)
    sigma = sample_uniform(n, seed)
    N = 2 * n + 1
    k = kernel(build(sigma))
    rng = RngSeed(cfg["master_seed"], PAIR_STREAM | (n << 32) | i).generator()
    m = cfg["pairs_per_sigma"]
    xs = rng.integers(-n, n + 1, size=m)
    ys = (xs + n + rng.integers(1, N, size=m)) % N - n  # uniform over y != x
    tables = {}
    values = []
    for x, y in zip(xs.tolist(), ys.tolist()):
        if y not in tables:
            tables[y] = hitting_times(k, y)
        values.append(tables[y][x])
    threshold = n / cfg["thresholds"]["divisor"]
    set_table = hitting_times(k, (-n, n))
    starts = rng.integers(-n + 1, n, size=m) if n > 1 else np.zeros(m, dtype=np.int64)
    set_values = [set_table[x] for x in starts.tolist()]

    fixed = []
    for x in range(-n, n):
        if sigma(x + 1) == x:
            other = sigma(x - 1) if x > -n else sigma(-n)
            fixed.append({"x": x, "y": other, "expected_hitting": hitting_times(k, other)[x]})
    return {
        "n": n,
        "index": i,
        "seed": _seed_dict(seed),
        "pairs": m,
        "pass_count": sum(v >= threshold for v in values),
        "min_sampled": min(values),
        "set_pass_count": sum(v >= threshold for v in set_values),
        "set_min_sampled": min(set_values),
        "shift_fixed_points": shift_fixed_points(sigma),
        "fixed_point_pairs": fixed,
    }


@_experiment("lower-bound")
def exp_lower_bound(config: ExperimentConfig, jobs: int = 1) -> dict:
    """Fraction of sampled (sigma, x, y) with E_x(tau_y) >= n/divisor, plus set-hitting variant."""
    cfg = config.echo()
    th = config.thresholds
    items = [(cfg, n, i) for n in config.n_values for i in range(config.num_sigmas)]
    records = run_items(_lower_item, items, jobs)
    aggregates, checks = [], []
    for n in config.n_values:
        rs = [r for r in records if r["n"] == n]
        total = sum(r["pairs"] for r in rs)
        frac = sum(r["pass_count"] for r in rs) / total
        set_frac = sum(r["set_pass_count"] for r in rs) / total
        aggregates.append(
            {
                "n": n,
                "threshold": n / th["divisor"],
                "pass_fraction": _stat(frac, "fraction of sampled (sigma,x,y)", total),
                "set_pass_fraction": _stat(set_frac, "fraction of sampled (sigma,x) interior starts", total),
                "sigma_min_median": _stat(_quantile([r["min_sampled"] for r in rs], 0.5), "median over sigma of min over sampled pairs", len(rs)),
                "sigmas_with_self_loops": sum(1 for r in rs if r["shift_fixed_points"] > 0),
            }
        )
        checks.append(_check(f"pair_pass_fraction_n{n}", "statistical", frac >= th["pass_fraction"], value=frac, threshold=th["pass_fraction"], sample_size=total))
        checks.append(_check(f"set_pass_fraction_n{n}", "statistical", set_frac >= th["pass_fraction"], value=set_frac, threshold=th["pass_fraction"], sample_size=total))
        loops = [p for r in rs for p in r["fixed_point_pairs"]]
        checks.append(
            _check(
                f"self_loop_pairs_hit_in_two_n{n}",
                "hard",
                all(abs(p["expected_hitting"] - 2.0) <= 1e-9 for p in loops),
                sample_size=len(loops),
            )
        )
    return {"records": records, "aggregates": aggregates, "checks": checks}


# -- universal-bound -------------------------------------------------------------


def _exit_item(args):
    cfg, n, i, image = args
    if image is None:
        seed = RngSeed(cfg["master_seed"], (n << 32) | i)
        sigma = sample_uniform(n, seed)
    else:
        seed, sigma = None, Permutation(n, image)
    h = hitting_times(kernel(build(sigma)), (-n, n))[0]
    return {"n": n, "index": i, "seed": _seed_dict(seed), "image": list(sigma.image), "exit_time": h}


@_experiment("universal-bound")
def exp_universal_bound(config: ExperimentConfig, jobs: int = 1) -> dict:
    """E_0(tau_{-n,n}) <= 4n^2+6n+2 for every sigma checked; exhaustive for small n."""
    cfg = config.echo()
    items = []
    for n in config.n_values:
        if config.exhaustive:
            if n > 3:
                raise ValueError("exhaustive mode supports n <= 3")
            items += [(cfg, n, i, p.image) for i, p in enumerate(all_permutations(n))]
        else:
            items += [(cfg, n, i, None) for i in range(config.num_sigmas)]
    records = run_items(_exit_item, items, jobs)
    aggregates, checks = [], []
    for n in config.n_values:
        rs = [r for r in records if r["n"] == n]
        bound = 4 * n * n + 6 * n + 2
        worst = max(rs, key=lambda r: (r["exit_time"], [-v for v in r["image"]]))
        violators = [r for r in rs if r["exit_time"] > bound * (1 + 1e-12)]
        exceed_sq = [r for r in rs if r["exit_time"] > n * n * (1 + 1e-12)]
        id_val = hitting_times(kernel(build(identity(n))), (-n, n))[0]
        aggregates.append(
            {
                "n": n,
                "mode": "exhaustive" if config.exhaustive else "random",
                "bound": bound,
                "max_exit_time": _stat(worst["exit_time"], "max over sigmas checked", len(rs)),
                "argmax_sigma": worst["image"],
                "identity_exit_time": id_val,
                "count_exceeding_n_squared": len(exceed_sq),
            }
        )
        checks.append(
            _check(
                f"universal_bound_n{n}",
                "hard",
                not violators,
                sample_size=len(rs),
                violations=[{"n": n, "image": r["image"], "exit_time": r["exit_time"]} for r in violators],
            )
        )
        checks.append(_check(f"identity_exit_is_n_squared_n{n}", "hard", abs(id_val - n * n) <= 1e-6, value=id_val))
        checks.append(
            _check(
                f"identity_slowest_probe_n{n}",
                "recorded",
                not exceed_sq,
                value=len(exceed_sq),
                sample_size=len(rs),
            )
        )
    return {"records": records, "aggregates": aggregates, "checks": checks}


# -- expansion ---------------------------------------------------------------------


def _expansion_item(args):
    cfg, n, i = args
    if i < 0:
        sigma, seed = identity(n), None
    else:
        seed = RngSeed(cfg["master_seed"], (n << 32) | i)
        sigma = sample_uniform(n, seed)
    g = build(sigma)
    if n <= N_MAX_EXACT:
        w = phi_star_exact(g)
    else:
        search_seed = RngSeed(cfg["master_seed"], SEARCH_STREAM | (n << 32) | (i & 0xFFFFFFFF))
        w = phi_star_search(g, search_seed, cfg["params"].get("budget", 20))
    rec = {
        "n": n,
        "index": i,
        "seed": _seed_dict(seed),
        "phi_star": float(w.phi),
        "phi_star_exact_fraction": f"{w.phi.numerator}/{w.phi.denominator}",
        "witness": w.set.vertices(),
        "method": w.method,
    }
    t_max = cfg["params"].get("sup_bound_t_max", 0)
    if t_max and w.method == "exact":
        prof = mixing_profile(kernel(g, "lazy"), t_max)
        rec["sup_bound_pass_rate"] = sup_bound_pass_rate(prof, float(w.phi))
    return rec


@_experiment("expansion")
def exp_expansion(config: ExperimentConfig, jobs: int = 1) -> dict:
    """Distribution of the minimum bottleneck ratio, identity baseline, union-bound trace."""
    cfg = config.echo()
    th = config.thresholds
    items = [(cfg, n, i) for n in config.n_values for i in [-1, *range(config.num_sigmas)]]
    results = run_items(_expansion_item, items, jobs)
    records = [r for r in results if r["index"] >= 0]
    ident = {r["n"]: r for r in results if r["index"] < 0}
    aggregates, checks = [], []
    for n in config.n_values:
        rs = [r for r in records if r["n"] == n]
        vals = [r["phi_star"] for r in rs]
        delta = _quantile(vals, th["quantile"])
        exact = rs[0]["method"] == "exact"
        agg = {
            "n": n,
            "method": rs[0]["method"],
            "delta_hat": _stat(delta, f"empirical {th['quantile']} quantile of phi_star", len(vals)),
            "min": min(vals),
            "median": _quantile(vals, 0.5),
            "identity_phi_star": ident[n]["phi_star"],
            "identity_witness": ident[n]["witness"],
        }
        rates = [r["sup_bound_pass_rate"] for r in rs if "sup_bound_pass_rate" in r]
        if rates:
            agg["sup_bound_pass_rate"] = _stat(float(np.mean(rates)), "mean over sigma of fraction of t with bound holding", len(rates))
        aggregates.append(agg)
        checks.append(_check(f"identity_phi_star_le_1_over_2n_n{n}", "hard", ident[n]["phi_star"] <= 1 / (2 * n) + 1e-15, value=ident[n]["phi_star"]))
        if exact:
            checks.append(_check(f"delta_hat_exceeds_identity_n{n}", "statistical", delta > ident[n]["phi_star"], value=delta, threshold=ident[n]["phi_star"], sample_size=len(vals)))
            checks.append(_check(f"phi_star_positive_n{n}", "hard", min(vals) > 0, value=min(vals)))

    ub_ns = config.params.get("union_bound_n", [1000, 10000, 100000])
    trace = [union_bound_sum(m, config.eps).log for m in ub_ns]
    aggregates.append({"union_bound_trace": {"eps": config.eps, "n": ub_ns, "log_sum": trace}})
    checks.append(_check("union_bound_strictly_decreasing", "hard", all(b < a for a, b in zip(trace, trace[1:])), value=trace))
    return {"records": records, "aggregates": aggregates, "checks": checks}


# -- mixing-distance -----------------------------------------------------------


def _mixing_item(args):
    cfg, n, i = args
    seed = RngSeed(cfg["master_seed"], (n << 32) | i)
    sigma = sample_uniform(n, seed)
    g = build(sigma)
    N = 2 * n + 1
    rec = {"n": n, "index": i, "seed": _seed_dict(seed)}

    lazy = kernel(g, "lazy")
    t_max = max(1, math.ceil(cfg["horizon_factor"] * N))
    prof = mixing_profile(lazy, t_max, stop_at_mix=True)
    rec["t_mix"] = prof.t_mix

    rng = RngSeed(cfg["master_seed"], PAIR_STREAM | (n << 32) | i).generator()
    m = cfg["pairs_per_sigma"]
    xs = rng.integers(-n, n + 1, size=m)
    ys = (xs + n + rng.integers(1, N, size=m)) % N - n
    dists = [int(distances_from(g, x)[y + n]) for x, y in zip(xs.tolist(), ys.tolist())]
    rec["distances"] = dists

    if n <= cfg["params"].get("survival_n_max", 100):
        steps = n // 3
        rec["survival_min"] = min(survival_probability(lazy, y, steps) for y in range(-n, n + 1))
        rec["survival_steps"] = steps
    return rec


@_experiment("mixing-distance")
def exp_mixing_and_distance(config: ExperimentConfig, jobs: int = 1) -> dict:
    """Lazy-walk mixing times, directed distances, and survival from stationarity."""
    cfg = config.echo()
    th = config.thresholds
    items = [(cfg, n, i) for n in config.n_values for i in range(config.num_sigmas)]
    records = run_items(_mixing_item, items, jobs)
    aggregates, checks = [], []
    k_max = config.params.get("k_max", 6)
    medians = {}
    for n in config.n_values:
        rs = [r for r in records if r["n"] == n]
        tm = [r["t_mix"] for r in rs]
        attained = [t for t in tm if t is not None]
        med = _quantile(attained, 0.5) if attained else None
        medians[n] = med
        dists = [d for r in rs for d in r["distances"]]
        frac = {k: float(np.mean([d > k for d in dists])) for k in range(1, k_max + 1)}
        agg = {
            "n": n,
            "t_mix_median": _stat(med, "median over sigma of lazy t_mix", len(attained)),
            "t_mix_not_attained": len(tm) - len(attained),
            "distance_exceeds_k": _stat(frac, "fraction of sampled (sigma,x,y) with d > k", len(dists)),
        }
        kk = th["distance_k"]
        checks.append(_check(f"distance_gt_{kk}_n{n}", "statistical", frac.get(kk, 0.0) >= th["distance_pass_fraction"], value=frac.get(kk), threshold=th["distance_pass_fraction"], sample_size=len(dists)))
        surv = [r["survival_min"] for r in rs if "survival_min" in r]
        if surv:
            agg["survival_min"] = _stat(min(surv), "min over sigma and y of exact P_pi(tau_y >= floor(n/3))", len(surv) * (2 * n + 1))
            checks.append(_check(f"survival_from_stationarity_n{n}", "hard", min(surv) >= th["survival_bound"], value=min(surv), threshold=th["survival_bound"]))
        aggregates.append(agg)
    lo, hi = config.n_values[0], config.n_values[-1]
    if hi > lo and medians[lo] and medians[hi] is not None:
        ratio = medians[hi] / medians[lo]
        checks.append(_check(f"t_mix_growth_{lo}_{hi}", "statistical", ratio <= th["tmix_ratio_max"], value=ratio, threshold=th["tmix_ratio_max"], linear_reference=hi / lo, sample_size=config.num_sigmas))
    return {"records": records, "aggregates": aggregates, "checks": checks}


# -- reports ---------------------------------------------------------------------------


def _round_floats(obj, digits: int = 12):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return repr(obj)
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, (np.floating,)):
        return _round_floats(float(obj), digits)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, digits) for v in obj]
    return obj


RUNTIME_NOTES = {
    "linear-hitting": "one dense all-pairs solve per sigma: ~0.1 s at n=400, ~0.02 s at n=200",
    "lower-bound": "up to pairs_per_sigma sparse solves per sigma: ~0.1 s per sigma at n=200",
    "universal-bound": "one sparse solve per sigma; exhaustive n=3 (5040 sigmas) ~5 s",
    "expansion": "exact search ~0.15 s per sigma at n=11; search mode scales with budget",
    "mixing-distance": "dense batch of distributions: ~0.2 s per sigma at n=400",
}


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> dict:
    """Run and return the full report; timing goes to the log, not the report."""
    t0 = time.perf_counter()
    body = EXPERIMENTS[config.experiment](config, jobs)
    log.info("%s finished in %.2f s", config.experiment, time.perf_counter() - t0)
    report = {
        "format": REPORT_TAG,
        "artifact_version": __version__,
        "experiment": config.experiment,
        "config": config.echo(),
        "runtime_note": RUNTIME_NOTES[config.experiment],
        "aggregates": body["aggregates"],
        "checks": body["checks"],
        "passed_hard": all(c["passed"] for c in body["checks"] if c["kind"] == "hard"),
        "passed_statistical": all(c["passed"] for c in body["checks"] if c["kind"] == "statistical"),
        "records": body["records"],
    }
    report = _round_floats(report)
    report["_extra_csv"] = _round_floats(body.get("extra_csv", {}))
    return report


def _flatten(record: dict) -> dict:
    flat = {}
    for key, v in record.items():
        if key == "seed":
            flat["master_seed"] = None if v is None else v["master_seed"]
            flat["stream_id"] = None if v is None else v["stream_id"]
        elif isinstance(v, (list, dict)):
            flat[key] = json.dumps(v, separators=(",", ":"))
        else:
            flat[key] = v
    return flat


def rows_to_csv(rows: list[dict], experiment: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {REPORT_TAG} experiment={experiment}\n")
    if not rows:
        return buf.getvalue()
    columns: list[str] = []
    for r in rows:
        for c in r:
            if c not in columns:
                columns.append(c)
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", restval="")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    return buf.getvalue()


def report_json(report: dict) -> str:
    body = {k: v for k, v in report.items() if not k.startswith("_")}
    return json.dumps(body, indent=2, sort_keys=False) + "\n"


def report_records_csv(report: dict) -> str:
    return rows_to_csv([_flatten(r) for r in report["records"]], report["experiment"])


def write_report(report: dict, out_dir: str) -> list[str]:
    """Write report.json, records.csv and any plot-ready CSVs into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    files = {"report.json": report_json(report), "records.csv": report_records_csv(report)}
    for name, rows in report.get("_extra_csv", {}).items():
        files[name] = rows_to_csv(rows, report["experiment"])
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            fh.write(text)
        paths.append(path)
    return paths


def raise_on_hard_failure(report: dict) -> None:
    for c in report["checks"]:
        if c["kind"] == "hard" and not c["passed"]:
            sigma = None
            if c.get("violations"):
                v = c["violations"][0]
                sigma = Permutation(v["n"], tuple(v["image"]))
            raise BoundViolation(f"hard check {c['name']} failed", sigma)
