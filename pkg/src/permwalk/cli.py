"""``permwalk`` command line.

Exit codes: 0 success, 1 a hard bound/identity check failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .digraph import VertexSet, build, is_strongly_connected, square
from .errors import BoundViolation, UnsupportedSizeError
from .expansion import N_MAX_EXACT, counting_bound, phi, phi_star_exact, phi_star_search, ratio_bound, union_bound_sum
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    raise_on_hard_failure,
    report_json,
    report_records_csv,
    run_experiment,
    write_report,
)
from .markov import hitting_times, kernel, mixing_profile, target_label, worst_case_hitting
from .montecarlo import runs_to_csv, simulate_hits
from .perm import Permutation, identity, sample_uniform, shift_fixed_points
from .rng import RngSeed

log = logging.getLogger("permwalk")


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--n", type=int, help="half-width of the interval [-n, n]")
    p.add_argument("--seed", type=int, help="master seed (samples sigma when no --sigma-file)")
    p.add_argument("--stream", type=int, default=0, help="stream id for sampling sigma")
    p.add_argument("--sigma-file", help="JSON permutation {\"n\", \"image\"}")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--out", help="output file (or directory for experiments)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--mode", choices=("simple", "lazy"), default="simple")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="permwalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    add("gen-perm", "sample (or write the identity) permutation as JSON").add_argument("--identity", action="store_true")
    gs = add("graph-stats", "degree, connectivity and self-loop summary of G")
    gs.add_argument("--edges", action="store_true", help="print the tab-separated edge list instead")
    gs.add_argument("--square", action="store_true", help="use the square graph G^2")

    h = add("hit", "expected hitting times of a vertex or set")
    h.add_argument("--target", required=True, help="vertex, or set:a,b,...")
    h.add_argument("--start", type=int)
    h.add_argument("--method", choices=("auto", "direct", "gauss-seidel"), default="auto")

    ha = add("hit-all", "worst-case expected hitting time over all ordered pairs")
    ha.add_argument("--method", choices=("solve", "fundamental"), default="solve")

    ph = add("phi", "bottleneck ratio of a given set")
    ph.add_argument("--set", required=True, dest="vset", help="comma-separated vertices")
    ph.add_argument("--square", action="store_true")

    ps = add("phi-star", "minimum bottleneck ratio (exact for n <= 11, else search)")
    ps.add_argument("--square", action="store_true")
    ps.add_argument("--search", action="store_true", help="force the randomized search")
    ps.add_argument("--budget", type=int, default=20)

    mx = add("mix", "TV / sup-norm mixing profile (CSV)")
    mx.add_argument("--t-max", type=int, default=100)

    mc = add("mc-hit", "Monte Carlo hitting-time estimate")
    mc.add_argument("--target", required=True)
    mc.add_argument("--start", type=int, required=True)
    mc.add_argument("--runs", type=int, default=10000)
    mc.add_argument("--step-cap", type=int)

    b = add("bounds", "counting and union-bound quantities")
    b.add_argument("--m", type=int)
    b.add_argument("--eps", type=float, default=0.005)
    b.add_argument("--variant", choices=("quartic", "interval"), default="quartic")

    ex = add("experiment", "run a seeded experiment and emit a report")
    ex.add_argument("name", choices=sorted(EXPERIMENTS))
    ex.add_argument("--n-values", help="comma-separated n list (overrides --n)")
    ex.add_argument("--num-sigmas", type=int)
    ex.add_argument("--pairs-per-sigma", type=int)
    ex.add_argument("--exhaustive", action="store_true")
    return parser


def _parse_target(text: str):
    try:
        if text.startswith("set:"):
            return tuple(int(v) for v in text[4:].split(",") if v != "")
        return int(text)
    except ValueError:
        raise UsageError(f"bad target {text!r}; use a vertex or set:a,b,...") from None


def _sigma(args) -> Permutation:
    if args.sigma_file:
        with open(args.sigma_file) as fh:
            sigma = Permutation.from_dict(json.load(fh))
        if args.n is not None and args.n != sigma.n:
            raise UsageError(f"--n {args.n} disagrees with sigma file (n={sigma.n})")
        return sigma
    if args.n is None:
        raise UsageError("--n or --sigma-file is required")
    if args.seed is not None and not getattr(args, "identity", False):
        return sample_uniform(args.n, RngSeed(args.seed, args.stream))
    return identity(args.n)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _num(x: float) -> str:
    # solver noise beyond 1e-9 is not meaningful; prints 100.0 rather than 100.00000000000001
    return repr(round(float(x), 9))


def _cmd_gen_perm(args):
    _emit(_sigma(args).to_json() + "\n", args.out)


def _cmd_graph_stats(args):
    g = build(_sigma(args))
    gg = square(g) if args.square else g
    if args.edges:
        _emit(gg.to_edge_list(), args.out)
        return
    stats = {
        "n": g.n,
        "graph": "G2" if args.square else "G",
        "out_degree": int(gg.degree),
        "in_degree_regular": bool((gg.in_adj.shape[1] == gg.degree)),
        "strongly_connected": is_strongly_connected(gg.out_adj),
        "shift_fixed_points": shift_fixed_points(g.sigma),
        "self_loops": int(sum(1 for u, row in enumerate(gg.out_adj.tolist()) for v in row if u == v)),
    }
    _emit(json.dumps(stats) + "\n", args.out)


def _cmd_hit(args):
    sigma = _sigma(args)
    target = _parse_target(args.target)
    table = hitting_times(kernel(build(sigma), args.mode), target, method=args.method)
    if args.start is not None:
        _emit(_num(table[args.start]) + "\n", args.out)
    elif args.format == "json":
        _emit(json.dumps({"target": target_label(target), "mode": args.mode, "residual": table.residual,
                          "values": {str(x): table[x] for x in range(-sigma.n, sigma.n + 1)}}) + "\n", args.out)
    else:
        _emit(table.to_csv(), args.out)


def _cmd_hit_all(args):
    wc = worst_case_hitting(kernel(build(_sigma(args)), args.mode), method=args.method)
    if args.format == "csv":
        _emit(f"value,start,target\n{_num(wc.value)},{wc.start},{wc.target}\n", args.out)
    else:
        _emit(json.dumps({"value": round(wc.value, 9), "start": wc.start, "target": wc.target, "mode": args.mode}) + "\n", args.out)


def _graph(args):
    g = build(_sigma(args))
    return square(g) if args.square else g


def _cmd_phi(args):
    g = _graph(args)
    try:
        vs = [int(v) for v in args.vset.split(",") if v != ""]
    except ValueError:
        raise UsageError(f"bad --set {args.vset!r}") from None
    w = phi(VertexSet.of(g.n, vs), g)
    _emit(json.dumps(w.to_dict(args.seed)) + "\n", args.out)


def _cmd_phi_star(args):
    g = _graph(args)
    if args.search or g.n > N_MAX_EXACT:
        w = phi_star_search(g, RngSeed(args.seed or 0, 1), args.budget)
    else:
        w = phi_star_exact(g)
    _emit(json.dumps(w.to_dict(args.seed)) + "\n", args.out)


def _cmd_mix(args):
    prof = mixing_profile(kernel(build(_sigma(args)), args.mode), args.t_max)
    if args.format == "json":
        _emit(json.dumps({"t_mix": prof.t_mix, "max_tv": prof.max_tv.tolist(), "linf": prof.linf.tolist()}) + "\n", args.out)
    else:
        _emit(prof.to_csv(), args.out)


def _cmd_mc_hit(args):
    g = build(_sigma(args))
    target = _parse_target(args.target)
    master = args.seed or 0
    times, cens = simulate_hits(g, args.start, target, args.mode, master, args.runs, args.step_cap)
    if args.format == "csv":
        _emit(runs_to_csv(args.start, target, args.mode, times, cens), args.out)
        return
    done = times[~cens]
    summary = {
        "runs": args.runs,
        "censored": int(cens.sum()),
        "mean": float(done.mean()) if done.size else None,
        "standard_error": float(done.std(ddof=1) / done.size**0.5) if done.size > 1 else None,
        "mode": args.mode,
        "target": target_label(target),
        "start": args.start,
        "master_seed": master,
    }
    _emit(json.dumps(summary) + "\n", args.out)


def _cmd_bounds(args):
    if args.n is None:
        raise UsageError("--n is required")
    out = {"n": args.n, "eps": args.eps}
    if args.m is not None:
        out["counting_bound"] = {"log": counting_bound(args.n, args.m, args.eps).log, "value": counting_bound(args.n, args.m, args.eps).value}
        out["ratio_bound"] = {"log": ratio_bound(args.n, args.m, args.eps).log, "value": ratio_bound(args.n, args.m, args.eps).value}
    if args.n >= 2 and args.eps < 0.125:
        u = union_bound_sum(args.n, args.eps, args.variant)
        out["union_bound_sum"] = {"variant": args.variant, "log": u.log, "value": u.value}
    _emit(json.dumps(out) + "\n", args.out)


def _cmd_experiment(args):
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        if cfg.experiment != args.name:
            raise UsageError(f"config is for {cfg.experiment!r}, not {args.name!r}")
        data = cfg.echo() | {"out": cfg.out}
    else:
        data = {"experiment": args.name, "n_values": []}
    if args.n_values:
        data["n_values"] = [int(v) for v in args.n_values.split(",")]
    elif args.n is not None:
        data["n_values"] = [args.n]
    for key in ("num_sigmas", "pairs_per_sigma"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.exhaustive:
        data["exhaustive"] = True
    if args.out:
        data["out"] = args.out
    cfg = ExperimentConfig.from_dict(data)
    report = run_experiment(cfg, jobs=args.jobs)
    if cfg.out:
        for path in write_report(report, cfg.out):
            log.info("wrote %s", path)
    elif args.format == "csv":
        sys.stdout.write(report_records_csv(report))
    else:
        sys.stdout.write(report_json(report))
    raise_on_hard_failure(report)


COMMANDS = {
    "gen-perm": _cmd_gen_perm,
    "graph-stats": _cmd_graph_stats,
    "hit": _cmd_hit,
    "hit-all": _cmd_hit_all,
    "phi": _cmd_phi,
    "phi-star": _cmd_phi_star,
    "mix": _cmd_mix,
    "mc-hit": _cmd_mc_hit,
    "bounds": _cmd_bounds,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except BoundViolation as exc:
        print(f"permwalk: {exc}", file=sys.stderr)
        if exc.sigma is not None:
            print(exc.sigma.to_json(), file=sys.stderr)
        return 1
    except (UsageError, UnsupportedSizeError, ValueError, OSError) as exc:
        print(f"permwalk: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
