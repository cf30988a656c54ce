"""Command-line interface.

Every subcommand writes ``report.json`` (or ``report.csv`` with
``--format csv``) into ``--out`` holding the full configuration, the library
version and the results. Exit codes: 0 success, 1 a solve was flagged as not
converged, 2 usage or input error.
"""
import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis as an, io_formats as io, ops, sampling as sa
from . import solver as so, structure as st
from .assets import ASSET_KINDS, gen_asset

EXIT_OK = 0
EXIT_NONCONVERGED = 1
EXIT_USAGE = 2

EXPERIMENTS = ("1d-structure", "2d-maps", "phantom-lines")


class CliError(Exception):
    pass


def _seed(args):
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get("TVCS_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"TVCS_SEED must be an integer, got {env!r}") from None
    return 0


def _flatten(prefix, obj, rows):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], rows)
    elif isinstance(obj, (list, tuple)) and obj and isinstance(obj[0], (dict, list, tuple)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, obj))


def _write_report(args, command, config, results):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"command": command, "version": __version__, "config": config, "results": results}
    if args.format == "json":
        path = out / "report.json"
        io.write_report(path, report)
    else:
        path = out / "report.csv"
        rows = []
        _flatten("", io._jsonable(report), rows)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["key", "value"])
            w.writerows(rows)
    return path


def _load_asset(path):
    path = Path(path)
    if path.suffix == ".csv":
        data = io.read_csv(path)["data"]
    else:
        data = io.decode(path.read_bytes())["data"]
    if isinstance(data, str):
        raise CliError(f"{path} holds a pattern, not a signal or image")
    # assets are real; keep complex only when the file really is complex
    return data.real if np.allclose(data.imag, 0) else data


def _save_asset(path, x, note):
    kind = "signal1d" if np.ndim(x) == 1 else "image2d"
    if str(path).endswith(".csv"):
        io.write_csv(path, kind, x, note)
    else:
        io.write_binary(path, kind, x, note)


def _config_echo(args):
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    cfg["seed"] = _seed(args)
    return cfg


# ----------------------------------------------------------------- commands


def cmd_gen(args):
    seed = _seed(args)
    x = gen_asset(args.kind, args.n, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = ".csv" if args.format == "csv" else ".tvcs"
    path = out / f"{args.kind}_{args.n}{ext}"
    _save_asset(path, x, f"kind={args.kind} n={args.n} seed={seed}")
    if x.ndim == 2:
        io.write_pgm(out / f"{args.kind}_{args.n}.pgm", x)
    struct = st.detect_structure(x)
    results = {"path": str(path), "n_jumps": struct.n_jumps, "fineness": st.fineness(struct)}
    _write_report(args, "gen", _config_echo(args), results)
    return EXIT_OK


def _build_pattern(args, seed):
    dim = args.dim
    n = args.n
    if args.scheme == "uniform":
        return sa.uniform_plus_dc(n, args.m, seed, dim)
    if args.scheme == "lowpass":
        return sa.lowpass_plus_uniform(n, args.n_low, args.fraction, seed, dim)
    if args.scheme == "radial":
        if dim != 2:
            raise CliError("radial lines need --dim 2")
        return sa.radial_lines(n, args.lines, seed)
    if args.scheme == "variable":
        return sa.variable_density(n, args.fraction, args.exponent, args.n_low, seed, dim)
    if args.scheme == "multilevel":
        if not args.levels:
            raise CliError("multilevel needs --levels")
        bounds = [float(v) for v in args.levels.split(",")]
        if dim == 1:
            scheme = sa.LevelScheme.from_bands(n, [int(b) for b in bounds], seed=seed)
        else:
            scheme = sa.LevelScheme.from_annuli(n, bounds, seed=seed)
        scheme.budgets = sa.inside_out_budgets(scheme.sizes, args.m)
        return sa.draw_multilevel(scheme, seed)
    raise CliError(f"unknown scheme {args.scheme!r}")


def cmd_sample(args):
    seed = _seed(args)
    pat = _build_pattern(args, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "pattern.txt"
    io.write_pattern(path, pat)
    results = {"path": str(path), "size": len(pat), "fraction": len(pat) / args.n ** args.dim,
               "contains_dc": pat.contains_dc()}
    _write_report(args, "sample", _config_echo(args), results)
    return EXIT_OK


def cmd_recover(args):
    seed = _seed(args)
    x = _load_asset(args.input)
    n = x.shape[0]
    pat = io.read_pattern(args.pattern, n, x.ndim)
    y = pat.restrict(ops.dft(x))
    noise_norm = 0.0
    if args.noise > 0:
        rng = sa.make_rng(seed)
        e = rng.normal(size=y.shape) + 1j * rng.normal(size=y.shape)
        e *= args.noise / np.linalg.norm(e)
        y = y + e
        noise_norm = float(np.linalg.norm(e))
    delta = args.delta if args.delta is not None else noise_norm
    cfg = so.SolverConfig(mode=args.mode, delta=delta, alpha=args.alpha,
                          max_outer=args.max_outer, tv_flavor=args.flavor)
    res = so.recover(y, pat, cfg, truth=x)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _save_asset(out / ("recovered.csv" if args.format == "csv" else "recovered.tvcs"),
                res.x.real, f"recovered seed={seed}")
    if x.ndim == 2:
        io.write_pgm(out / "recovered.pgm", res.x)
    config = _config_echo(args)
    config["solver"] = cfg.to_dict()
    _write_report(args, "recover", config, {**res.summary(), "noise_norm": noise_norm})
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_metrics(args):
    x = _load_asset(args.input)
    struct = st.detect_structure(x, args.tau)
    grid = [float(p) for p in args.p_grid.split(",")]
    rep = st.sparsity_curve(struct, grid)
    results = {"fineness": rep.fineness, "n_jumps": rep.sparsity,
               "active_sparsity": [{"p": p, "S": s} for p, s in rep.samples],
               "monotone": rep.is_monotone()}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "active_sparsity.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "S"])
        w.writerows(rep.samples)
    _write_report(args, "metrics", _config_echo(args), results)
    return EXIT_OK


def cmd_coherence(args):
    x = _load_asset(args.input)
    struct = st.detect_structure(x) if x.ndim == 1 else st.detect_partition_2d(x, rule=args.rule)
    rep = an.incoherence_report(struct, x)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = sa.full_grid(rep.n, rep.dimension)
    with open(out / "row_max.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k"] if rep.dimension == 1 else ["k1", "k2"])
        w.writerows([list(np.atleast_1d(k)) + [v] for k, v in zip(grid, rep.row_max.ravel())])
    results = {"pinv_norm_1to2": rep.pinv_norm, "max_entry": float(rep.row_max.max()),
               "decay_constant": rep.max_decay_ratio(),
               "decay_violations_at_2": int(len(rep.decay_violations(2.0)))}
    _write_report(args, "coherence", _config_echo(args), results)
    return EXIT_OK


def cmd_certify(args):
    seed = _seed(args)
    x = _load_asset(args.input)
    struct = st.detect_structure(x)
    res = an.golfing_certificate(struct, x, args.rate, args.eps, seed=seed,
                                 first_fraction=args.first_fraction)
    results = res.summary()
    results["rounds"] = [r.__dict__ for r in res.rounds]
    _write_report(args, "certify", _config_echo(args), results)
    return EXIT_OK


def cmd_conditions(args):
    x = _load_asset(args.input)
    struct = st.detect_structure(x)
    bounds = [float(v) for v in args.levels.split(",")]
    if x.ndim == 1:
        scheme = sa.LevelScheme.from_bands(struct.n, [int(b) for b in bounds])
    else:
        scheme = sa.LevelScheme.from_annuli(struct.n, bounds)
    if args.m is not None:
        scheme.budgets = sa.inside_out_budgets(scheme.sizes, args.m)
    rep = an_required(struct, x, scheme, args)
    _write_report(args, "conditions", _config_echo(args), rep)
    return EXIT_OK


def an_required(struct, x, scheme, args):
    c = an.level_constants(struct, x, scheme) if (x.ndim == 2 and args.level_constants) else None
    rep = sa.required_rates(struct, scheme, args.eps, C=args.C, c=c)
    return {"s": rep.s, "fineness": rep.fineness, "q": rep.q, "log_factor": rep.log_factor,
            "feasible": rep.feasible, "condition_ii": rep.ii_value,
            "condition_ii_allocations": rep.ii_allocations,
            "levels": [lv.__dict__ for lv in rep.levels]}


# ---------------------------------------------------------------- reproduce


def _solve(x, pat, max_outer):
    y = pat.restrict(ops.dft(x))
    return so.recover(y, pat, so.SolverConfig(max_outer=max_outer), truth=x)


def reproduce_1d(seed, out, max_outer=10000):
    """Blocky and spiky signals with equal jump counts, one shared pattern."""
    n = 256
    pat = sa.lowpass_plus_uniform(n, 32, 0.10, seed)
    io.write_pattern(out / "pattern_1d.txt", pat)
    cases, converged = [], True
    for kind in ("blocky1d", "spiky1d"):
        x = gen_asset(kind, n, seed)
        res = _solve(x, pat, max_outer)
        io.write_binary(out / f"{kind}_recovered.tvcs", "signal1d", res.x.real, f"seed={seed}")
        struct = st.detect_cosupport_1d(x)
        cases.append({"asset": kind, "n_jumps": struct.n_jumps, "fineness": st.fineness(struct),
                      **res.summary()})
        converged &= res.converged
    return {"n": n, "pattern_size": len(pat), "cases": cases}, converged


def reproduce_2d(seed, out, max_outer=500, fraction=0.05):
    """Uniform versus multilevel pattern at equal budget on nested squares."""
    n = 128
    x = gen_asset("nested_squares", n, seed)
    m = int(round(fraction * n * n))
    uni = sa.uniform_plus_dc(n, m - 1, seed, 2)
    scheme = sa.LevelScheme.from_annuli(n, (4, 8, 16, 32, 64, 1e9), seed=seed)
    scheme.budgets = sa.inside_out_budgets(scheme.sizes, len(uni))
    multi = sa.draw_multilevel(scheme, seed)
    cases, converged = [], True
    for name, pat in (("uniform", uni), ("multilevel", multi)):
        io.write_pattern(out / f"pattern_{name}.txt", pat)
        io.write_pgm(out / f"pattern_{name}.pgm", pat.mask().astype(float))
        res = _solve(x, pat, max_outer)
        io.write_pgm(out / f"nested_squares_{name}.pgm", res.x, vmax=float(np.abs(x).max()))
        cases.append({"pattern": name, "size": len(pat), **res.summary()})
        converged &= res.converged
    ratio = cases[0]["rel_error"] / max(cases[1]["rel_error"], 1e-300)
    return {"n": n, "budget": m, "budgets_multilevel": scheme.budgets, "cases": cases,
            "error_ratio": ratio}, converged


def reproduce_phantom(seed, out, max_outer=400, target=1e-2, lo=2, hi=64):
    """Smallest number of radial lines that recovers the phantom to ``target``."""
    n = 128
    x = gen_asset("shepp_logan", n, seed)
    tried = {}
    converged = True

    def run(lines):
        nonlocal converged
        if lines not in tried:
            pat = sa.radial_lines(n, lines, seed)
            res = _solve(x, pat, max_outer)
            tried[lines] = {"lines": lines, "size": len(pat), **res.summary()}
        return tried[lines]["rel_error"] < target

    if not run(hi):
        raise CliError(f"{hi} radial lines do not reach rel error {target}")
    # bisection on the smallest passing L, assuming success is monotone in L
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if run(mid):
            hi = mid
        else:
            lo = mid
    best = sa.radial_lines(n, hi, seed)
    io.write_pattern(out / "pattern_phantom.txt", best)
    res = _solve(x, best, max_outer)
    io.write_pgm(out / "phantom_recovered.pgm", res.x, vmax=1.0)
    for rec in tried.values():
        converged &= rec["converged"]
    return {"n": n, "target": target, "min_lines": hi,
            "sweep": [tried[k] for k in sorted(tried)]}, converged


def cmd_reproduce(args):
    seed = _seed(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.experiment == "1d-structure":
        results, ok = reproduce_1d(seed, out, max_outer=args.max_outer or 10000)
    elif args.experiment == "2d-maps":
        results, ok = reproduce_2d(seed, out, max_outer=args.max_outer or 500)
    else:
        results, ok = reproduce_phantom(seed, out, max_outer=args.max_outer or 400)
    _write_report(args, f"reproduce {args.experiment}", _config_echo(args), results)
    with open(out / "rel_errors.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "rel_error", "iterations", "converged"])
        for c in results.get("cases", results.get("sweep", [])):
            name = c.get("asset") or c.get("pattern") or f"L={c.get('lines')}"
            w.writerow([name, c["rel_error"], c["iterations"], c["converged"]])
    return EXIT_OK if ok else EXIT_NONCONVERGED


# ------------------------------------------------------------------ parser


def build_parser():
    p = argparse.ArgumentParser(prog="tvcs", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"tvcs {__version__}")
    p.add_argument("--seed", type=int, default=None, help="random seed (falls back to TVCS_SEED, then 0)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic asset")
    g.add_argument("kind", choices=ASSET_KINDS)
    g.add_argument("--n", type=int, default=128)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("sample", help="draw a sampling pattern")
    s.add_argument("scheme", choices=("uniform", "lowpass", "radial", "variable", "multilevel"))
    s.add_argument("--n", type=int, default=128)
    s.add_argument("--dim", type=int, choices=(1, 2), default=2)
    s.add_argument("--m", type=int, default=100, help="sample budget (uniform, multilevel)")
    s.add_argument("--n-low", type=int, default=0)
    s.add_argument("--fraction", type=float, default=0.1)
    s.add_argument("--exponent", type=float, default=2.0)
    s.add_argument("--lines", type=int, default=22)
    s.add_argument("--levels", default=None, help="comma-separated band ends (1D) or radii (2D)")
    s.set_defaults(func=cmd_sample)

    r = sub.add_parser("recover", help="recover an asset from its Fourier samples")
    r.add_argument("input")
    r.add_argument("pattern")
    r.add_argument("--mode", choices=("constrained", "unconstrained"), default="constrained")
    r.add_argument("--delta", type=float, default=None)
    r.add_argument("--alpha", type=float, default=1.0)
    r.add_argument("--noise", type=float, default=0.0, help="norm of added complex noise")
    r.add_argument("--flavor", choices=ops.TV_FLAVORS, default=None)
    r.add_argument("--max-outer", type=int, default=2000)
    r.set_defaults(func=cmd_recover)

    m = sub.add_parser("metrics", help="active sparsity and fineness")
    m.add_argument("input")
    m.add_argument("--tau", type=float, default=None)
    m.add_argument("--p-grid", default="0,0.5,1,2,4,8,16,32,64")
    m.set_defaults(func=cmd_metrics)

    c = sub.add_parser("coherence", help="incoherence profile of U")
    c.add_argument("input")
    c.add_argument("--rule", choices=st.COSUPPORT_RULES, default="pixel")
    c.set_defaults(func=cmd_coherence)

    ce = sub.add_parser("certify", help="run the golfing construction")
    ce.add_argument("input")
    ce.add_argument("--rate", type=float, default=1.0)
    ce.add_argument("--eps", type=float, default=0.25)
    ce.add_argument("--first-fraction", type=float, default=0.25)
    ce.set_defaults(func=cmd_certify)

    co = sub.add_parser("conditions", help="evaluate the per-level sample conditions")
    co.add_argument("input")
    co.add_argument("--levels", required=True)
    co.add_argument("--m", type=int, default=None)
    co.add_argument("--eps", type=float, default=0.25)
    co.add_argument("--C", type=float, default=1.0)
    co.add_argument("--level-constants", action="store_true",
                    help="compute the 2D c_k instead of using their lower bound 1")
    co.set_defaults(func=cmd_conditions)

    rp = sub.add_parser("reproduce", help="run an experiment end to end")
    rp.add_argument("experiment", choices=EXPERIMENTS)
    rp.add_argument("--max-outer", type=int, default=None)
    rp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, io.FormatError, ValueError, FileNotFoundError) as exc:
        print(f"tvcs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
