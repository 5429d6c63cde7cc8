"""Command-line entry point ``sampnum``.

Exit status: 0 on success, 2 for usage errors and invalid models, 3 for
rank or certification failures, 4 for truncation failures.

Every subcommand that writes ``--out FILE`` also writes ``FILE.manifest``
holding the fully resolved options; ``--config FILE.manifest`` replays the
run (flags given on the command line override the file).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .concentration import (
    certification_trials, check_condition, failure_probability_bound, smallest_n,
    tail_deviation, truncation_level,
)
from .density import SamplingDensity, draw_nodes
from .errors import (
    BudgetError, CertificationError, InvalidModelError, RankError, SearchFailure,
    TruncationError,
)
from .io import (
    evaluate_function, fmt, parse_function, read_config, read_frame_csv, write_config,
    write_frame_csv, write_nodes_csv,
)
from .leastsq import RecoveryOperator, apply_recovery, build_matrix, weight_samples
from .pipeline import CSV_FIELDS, METHODS, basis_for, fit_rate, run_recovery_experiment
from .spectrum import (
    KernelModel, enumerate_spectrum, format_label, spectral_function_N, write_spectrum_csv,
)
from .weaver import (
    FiniteFrame, barrier_greedy_subsample, brute_force_partition, certify_subset,
    constant_budget, gamma_product, recursive_halving, remark_constant_chain,
)

EXIT_USAGE = 2
EXIT_RANK = 3
EXIT_TRUNCATION = 4
SEED_ENV = "SAMPNUM_SEED"
BOOLEAN_OPTIONS = {"tail", "unweighted"}
MAX_TAIL_EIGENPAIRS = 1 << 16


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _model_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=("torus", "legendre"), default="torus")
    g.add_argument("--d", type=int, default=1, help="torus dimension")
    g.add_argument("--s", type=float, default=1.0, help="torus smoothness (> 1/2)")
    g.add_argument("--sigma", help="comma-separated singular numbers (legendre)")
    g.add_argument("--sigma-file", help="file with one singular number per line (legendre)")
    g.add_argument("--geometric", type=float, help="legendre sigma_k^2 = RATIO^(k-1)")
    g.add_argument("--length", type=int, default=40, help="length of the geometric sequence")


def _common_options(p: argparse.ArgumentParser, seed=True, out=True) -> None:
    p.add_argument("--config", help="key=value file providing option defaults")
    if seed:
        p.add_argument("--seed", type=int, default=int(os.environ.get(SEED_ENV, "0")))
    if out:
        p.add_argument("--out", help="output file (default: standard output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sampnum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="largest eigenpairs of a model as CSV")
    _model_options(p)
    _common_options(p, seed=False)
    p.add_argument("--count", type=int, required=True)

    p = sub.add_parser("sample", help="draw nodes from the sampling density")
    _model_options(p)
    _common_options(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--frame-out", help="also write the scaled weighted matrix as a frame CSV")

    p = sub.add_parser("certify", help="Monte Carlo frame certification")
    _model_options(p)
    _common_options(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, help="node count (default: smallest n satisfying the frame condition)")
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--factor", type=float, default=10.0,
                   help="oversampling constant c in N(m) <= n/(c r log n) used for the default n")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--unweighted", action="store_true", help="use the plain evaluation matrix")
    p.add_argument("--tail", action="store_true", help="also report the tail deviation per trial")
    p.add_argument("--tail-tol", type=float, default=1e-4)

    p = sub.add_parser("subsample", help="select a sub-frame from a frame CSV")
    _common_options(p)
    p.add_argument("--input", required=True, help="frame CSV (re,im column pairs)")
    p.add_argument("--method", choices=("brute", "halving", "greedy"), default="greedy")
    p.add_argument("--k1", type=float, default=1.0)
    p.add_argument("--k2", type=float, default=1.0)
    p.add_argument("--k3", type=float, default=1.0)
    p.add_argument("--target", type=int, help="greedy selection size (default 4 m)")
    p.add_argument("--engine", choices=("auto", "brute", "local"), default="auto")

    p = sub.add_parser("recover", help="weighted least-squares recovery of a test function")
    _model_options(p)
    _common_options(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, help="node count (default: smallest n with m <= n/(40 log n))")
    p.add_argument("--function", required=True, help='"label:coef,..." on the eigenfunctions')

    p = sub.add_parser("rate", help="worst-case error over a grid of m")
    _model_options(p)
    _common_options(p)
    p.add_argument("--m-grid", default="8,16,32,64")
    p.add_argument("--method", choices=METHODS, default="subsample")
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--trunc-ratio", type=float, default=1e-2)
    p.add_argument("--plot", help="write a log-log SVG plot to this path")

    p = sub.add_parser("constants", help="print the explicit constant chain")
    p.add_argument("--config", help="key=value file providing option defaults")
    p.add_argument("--tolerance", type=float, default=1e-10)
    return parser


def model_from_args(args) -> KernelModel:
    if args.model == "torus":
        return KernelModel.torus(args.d, args.s)
    sources = [args.sigma is not None, args.sigma_file is not None, args.geometric is not None]
    if sum(sources) != 1:
        raise InvalidModelError("legendre model needs exactly one of --sigma, --sigma-file, --geometric")
    if args.sigma is not None:
        return KernelModel.legendre(_float_list(args.sigma))
    if args.sigma_file is not None:
        return KernelModel.legendre(np.loadtxt(args.sigma_file, ndmin=1))
    return KernelModel.legendre_geometric(args.geometric, args.length)


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _manifest(args) -> None:
    if getattr(args, "out", None) is None:
        return
    values = {"command": args.command, "version": __version__}
    for k, v in sorted(vars(args).items()):
        if k in ("command", "config", "func"):
            continue
        values[k] = v
    write_config(str(args.out) + ".manifest", values)


def cmd_spectrum(args) -> int:
    basis = enumerate_spectrum(model_from_args(args), args.count)
    with _output(args.out) as fh:
        write_spectrum_csv(basis, fh)
    _manifest(args)
    return 0


def cmd_sample(args) -> int:
    model = model_from_args(args)
    basis = enumerate_spectrum(model, max(args.m, len(model.sigma) if model.sigma else args.m))
    density = SamplingDensity.from_basis(basis, args.m)
    nodes = draw_nodes(density, args.n, args.seed, args.stream)
    with _output(args.out) as fh:
        write_nodes_csv(fh, nodes)
    if args.frame_out:
        L = build_matrix(basis, nodes, args.m, weighted=True)
        with open(args.frame_out, "w", newline="") as fh:
            write_frame_csv(fh, L.entries / math.sqrt(args.n))
    _manifest(args)
    return 0


def cmd_certify(args) -> int:
    model = model_from_args(args)
    m, r = args.m, args.r
    basis = basis_for(model, m) if args.tail else enumerate_spectrum(
        model, max(m, len(model.sigma) if model.sigma else m))
    density = SamplingDensity.from_basis(basis, m)
    # the weighted condition N(m) = 2(m-1) <= n/(c r log n) holds once m <= n/(2 c r log n)
    n = args.n if args.n is not None else smallest_n(m, 2.0 * args.factor * r)
    eig = certification_trials(density, n, args.trials, args.seed, not args.unweighted, args.jobs)
    passed = (eig[:, 0] > 0.5) & (eig[:, 1] < 1.5)
    failures = int((~passed).sum())
    p = failures / args.trials
    # weighted rows satisfy |row|^2 = head/rho <= 2(m-1) for every density of this form
    N_of_m = 2.0 * (m - 1) if not args.unweighted else spectral_function_N(basis, m)
    report = {
        "m": m, "n": n, "r": r, "trials": args.trials, "seed": args.seed,
        "weighted": not args.unweighted,
        "condition_holds": check_condition(m, n, r, N_of_m),
        "failures": failures, "failure_frequency": p,
        "failure_bound": failure_probability_bound(n, r),
        "three_sigma": 3.0 * math.sqrt(p * (1 - p) / args.trials),
        "eigen_min": float(eig[:, 0].min()), "eigen_max": float(eig[:, 1].max()),
    }
    rows = [[t, fmt(lo), fmt(hi), bool(ok)] for t, ((lo, hi), ok) in enumerate(zip(eig, passed))]
    header = ["trial", "eigen_min", "eigen_max", "passed"]
    if args.tail:
        header += ["deviation", "slack", "threshold"]
        exceed = 0
        basis = _basis_for_tail(model, m, density, args.tail_tol)
        density = SamplingDensity.from_basis(basis, m)
        for t, row in enumerate(rows):
            rep = tail_deviation(density, draw_nodes(density, n, args.seed, t), r, tol=args.tail_tol)
            exceed += rep.exceeds
            row += [fmt(rep.deviation), fmt(rep.slack), fmt(rep.threshold)]
        report["tail_exceed"] = exceed
        report["tail_bound"] = 2.0**0.75 * n ** (1.0 - r)
    print(json.dumps(report, indent=2))
    if args.out:
        with _output(args.out) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        _manifest(args)
    return 0


def _basis_for_tail(model, m, density, tol):
    """Enlarge the retained spectrum until the discarded weighted tail is below ``tol``."""
    basis = density.basis
    while True:
        try:
            truncation_level(basis, density, tol)
            return basis
        except TruncationError:
            if model.family != "torus" or basis.count >= MAX_TAIL_EIGENPAIRS:
                raise
            basis = enumerate_spectrum(model, 2 * basis.count)
            density = SamplingDensity.from_basis(basis, m)


def cmd_subsample(args) -> int:
    frame = FiniteFrame(read_frame_csv(args.input))
    n, m = frame.n, frame.dim
    if args.method == "brute":
        part = brute_force_partition(frame)
        block = {
            "method": "brute", "feasible": part.feasible, "first": part.first.tolist(),
            "second": part.second.tolist(), "bounds": part.bounds, "target": part.target,
        }
        J = part.first
    else:
        if args.method == "halving":
            res = recursive_halving(frame, args.k1, args.k2, args.k3, engine=args.engine, seed=args.seed)
        else:
            res = barrier_greedy_subsample(frame, args.target or min(n, 4 * m))
            res = certify_subset(frame, res.J, constant_budget(args.k1, args.k2, args.k3, n / m), "greedy")
        J = res.J
        block = {
            "method": res.method, "size": res.size, "achieved_bounds": res.achieved_bounds,
            "budget": res.budget.triple if res.budget else None,
            "regime": res.budget.regime if res.budget else None,
            "certified": res.certified, "J": res.J.tolist(),
        }
    print(json.dumps(block, indent=2))
    if args.out:
        Path(args.out).write_text("\n".join(str(int(j)) for j in J) + "\n")
        _manifest(args)
    return 0


def cmd_recover(args) -> int:
    model = model_from_args(args)
    m = args.m
    basis = enumerate_spectrum(model, max(m, len(model.sigma) if model.sigma else m))
    density = SamplingDensity.from_basis(basis, m)
    n = args.n if args.n is not None else smallest_n(m, 40.0)
    nodes = draw_nodes(density, n, args.seed)
    terms = parse_function(args.function, basis.dim)
    op = RecoveryOperator.build(basis, nodes, m)
    f = evaluate_function(basis, terms, nodes.points)
    c = apply_recovery(op, f)
    residual = float(np.linalg.norm(op.frame.entries @ c - weight_samples(op.frame, f)) / math.sqrt(n))
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label", "re", "im"])
        for k, (lab, z) in enumerate(zip(basis.labels[: m - 1], c), start=1):
            w.writerow([k, format_label(lab), fmt(z.real), fmt(z.imag)])
    print(json.dumps({"m": m, "n": n, "seed": args.seed, "residual": residual}), file=sys.stderr)
    _manifest(args)
    return 0


def _rate_task(task):
    model, m, method, r, seed, trunc_ratio = task
    return run_recovery_experiment(model, m, method, r=r, seed=seed, trunc_ratio=trunc_ratio)


def cmd_rate(args) -> int:
    model = model_from_args(args)
    grid = _int_list(args.m_grid)
    tasks = [(model, m, args.method, args.r, args.seed + t, args.trunc_ratio)
             for m in grid for t in range(args.trials)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_rate_task, tasks))
    else:
        reports = [_rate_task(t) for t in tasks]
    reports.sort(key=lambda rep: (rep.m, rep.seed))
    fields = list(CSV_FIELDS) + ["wce_upper", "M_trunc"]
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for rep in reports:
            row = rep.row()
            w.writerow([fmt(row[k]) for k in fields])
    try:
        fit = fit_rate(reports, s=model.s, d=model.d)
        summary = {"slope": fit.slope, "log_power": fit.log_power, "reference_powers": fit.log_power_reference}
    except ValueError as exc:
        summary = {"slope": None, "note": str(exc)}
    print(json.dumps(summary), file=sys.stderr)
    if args.plot:
        plot_rate(reports, args.plot)
    _manifest(args)
    return 0


def plot_rate(reports, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = np.array([rep.n_used for rep in reports], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(n, [rep.wce for rep in reports], "o", label="worst-case error")
    ax.loglog(n, [rep.sigma_m for rep in reports], "x", label="sigma_m")
    ax.set_xlabel("sampled function values")
    ax.set_ylabel("L2 error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_constants(args) -> int:
    chain = remark_constant_chain()
    gamma = gamma_product(args.tolerance)
    print(f"gamma product      = {gamma.value!r} (+ remainder <= {gamma.remainder:.3e}, {len(gamma.partials)} factors)")
    print(f"gamma upper bound  = {gamma.upper!r} < 35.21: {gamma.upper < 35.21}")
    print(f"n(2)               = {chain.n_min}")
    print(f"failure bounds     = {chain.frame_failure!r}, {chain.deviation_failure!r}")
    print(f"40 log n(2)        = {chain.oversampling_lower!r}")
    print(f"(k1, k2, k3)       = {chain.k}")
    print(f"(c~1, c~2, c~3)    = {chain.c_tilde}")
    print(f"kappa              = {chain.kappa!r}")
    print(f"c1                 = {chain.c1!r}")
    print(f"c3                 = {chain.c3!r}")
    print(f"log correction     = {chain.log_correction!r}")
    print(f"c4                 = {chain.c4!r}")
    print(f"theta              = {chain.theta!r}")
    print(f"c5                 = {chain.c5!r}")
    print(f"c6                 = {chain.c6!r}")
    print(f"threshold m >=     = {chain.threshold!r}")
    print(f"C = 2 c5 c~1       = {chain.C!r}  (<= 1.5e6)")
    print(f"c = 1/(4 c~1)      = {chain.c!r}  (>= 3.8e-5)")
    for name, (value, ok) in chain.checks.items():
        print(f"[{'ok' if ok else 'FAIL'}] {name}: {value}")
    return 0 if chain.all_passed else 1


COMMANDS = {
    "spectrum": cmd_spectrum, "sample": cmd_sample, "certify": cmd_certify,
    "subsample": cmd_subsample, "recover": cmd_recover, "rate": cmd_rate,
    "constants": cmd_constants,
}


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre.add_argument("command", nargs="?")
    known, _ = pre.parse_known_args(argv)
    if not known.config or known.command not in COMMANDS:
        return
    values = read_config(known.config)
    values.pop("command", None)
    values.pop("version", None)
    subparser = parser._subparsers._group_actions[0].choices[known.command]
    valid = {a.dest for a in subparser._actions}
    unknown = set(values) - valid
    if unknown:
        parser.error(f"unknown keys in {known.config}: {', '.join(sorted(unknown))}")
    defaults = {}
    for k, v in values.items():
        if k in BOOLEAN_OPTIONS:
            defaults[k] = v.lower() in ("1", "true", "yes")
        elif v == "None":
            defaults[k] = None
        else:
            defaults[k] = v
    for action in subparser._actions:
        if action.dest in defaults:
            action.required = False
    subparser.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    except (OSError, ValueError) as exc:
        print(f"sampnum: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (InvalidModelError, BudgetError) as exc:
        print(f"sampnum: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RankError, CertificationError, SearchFailure) as exc:
        print(f"sampnum: numerical failure: {exc}", file=sys.stderr)
        return EXIT_RANK
    except TruncationError as exc:
        print(f"sampnum: truncation failure: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except ValueError as exc:
        print(f"sampnum: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
