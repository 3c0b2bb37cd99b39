"""Command-line harness.

Subcommands: gen, solve, reject-sample, sketch, precond, kaczmarz,
verify.  Matrices travel as headerless CSV; experiment reports as JSON.
Exit codes: 0 on success (all criteria pass for verify), 2 when a
verification criterion fails, 1 on operational errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import dataio
from ._version import __version__
from .designs import DESIGN_KINDS, make_dataset
from .errors import CullsqError
from .experiments import (
    EXPERIMENT_NAMES,
    ExperimentConfig,
    run_experiment,
)
from .influence import (
    enumerate_subset_distribution,
    rejection_sample_many,
    rejection_sample_subset,
)
from .kaczmarz import FastSolverConfig, kaczmarz_exact, kaczmarz_fast
from .regression import Dataset, full_solve, leverage_scores, thin_svd
from .rng import RngStream
from .sketching import (
    apply_sketch,
    build_preconditioner,
    make_dense_sign_jlt,
    make_identity_sketch,
    make_srht,
)


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="random seed")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cullsq",
        description="Influence-based row rejection and preconditioned Kaczmarz "
        "for label-frugal least squares.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--design", choices=DESIGN_KINDS, default="gaussian")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--spike-fraction", type=float, default=0.1)
    p.add_argument("--out-x", required=True, help="design matrix CSV path")
    p.add_argument("--out-y", help="labels CSV path")
    _add_common(p)

    p = sub.add_parser("solve", help="full least-squares solve")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--out", help="write weights CSV here")

    p = sub.add_parser("reject-sample", help="sample row subsets to throw out")
    p.add_argument("--x", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--max-trials", type=int, default=None)
    p.add_argument(
        "--exact",
        action="store_true",
        help="export the exact subset distribution instead of sampling",
    )
    p.add_argument("--out", help="CSV output (indices semicolon-joined[, probability])")
    _add_common(p)

    p = sub.add_parser("sketch", help="apply a sketch to a matrix")
    p.add_argument("--kind", choices=["srht", "sign", "identity"], required=True)
    p.add_argument("--r", type=int, help="embedding dimension")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("precond", help="build the sketched QR preconditioner")
    p.add_argument("--x", required=True)
    p.add_argument("--kind", choices=["srht", "sign", "identity"], default="srht")
    p.add_argument("--r", type=int, help="embedding dimension")
    p.add_argument("--out-t", help="triangular factor CSV")
    p.add_argument("--out-p", help="permutation matrix CSV")
    p.add_argument("--out-summary", help="JSON summary with singular values")
    _add_common(p)

    p = sub.add_parser("kaczmarz", help="run a randomized Kaczmarz solve")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--mode", choices=["exact", "fast"], default="exact")
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--trace", help="CSV error trace (t, squared_error); test mode")
    p.add_argument("--out", help="write weights CSV here")
    _add_common(p)

    p = sub.add_parser("verify", help="run a theorem-verification experiment")
    p.add_argument("experiment", choices=EXPERIMENT_NAMES)
    p.add_argument("--config", help="JSON config file (flags override)")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--design", choices=DESIGN_KINDS)
    p.add_argument("--noise", type=float)
    p.add_argument("--spike-fraction", type=float, dest="spike_fraction")
    p.add_argument("--trials", type=int)
    p.add_argument("--mode", choices=["exact", "fast", "both"])
    p.add_argument("--kappa", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write the JSON report here")
    return parser


_VERIFY_DEFAULTS = {
    "one-point": dict(n=100, d=5, trials=1),
    "k-points": dict(n=12, d=2, k=2),
    "sampler": dict(n=10, d=2, k=2, trials=20_000),
    "precond": dict(n=256, d=8, trials=20),
    "kaczmarz": dict(n=400, d=5, trials=200),
    "jlt": dict(n=512, d=8, trials=20),
}


def _cmd_gen(args) -> int:
    data = make_dataset(
        args.design,
        args.n,
        args.d,
        args.noise,
        RngStream(args.seed),
        spike_fraction=args.spike_fraction,
    )
    dataio.save_matrix(args.out_x, data.X)
    if args.out_y:
        dataio.save_vector(args.out_y, data.y)
    print(f"wrote {args.n}x{args.d} {args.design} design to {args.out_x}")
    return 0


def _cmd_solve(args) -> int:
    data = Dataset(X=dataio.load_matrix(args.x), y=dataio.load_vector(args.y))
    w_star, opt_error = full_solve(data)
    if args.out:
        dataio.save_vector(args.out, w_star)
    print(f"optimal squared error: {opt_error:.17g}")
    print("weights:", " ".join(format(v, ".12g") for v in w_star))
    return 0


def _cmd_reject_sample(args) -> int:
    data = Dataset(X=dataio.load_matrix(args.x))
    svd = thin_svd(data)
    profile = leverage_scores(svd)
    if args.exact:
        dist = enumerate_subset_distribution(svd, profile, args.k)
        lines = [
            ";".join(str(i) for i in subset.indices) + f",{prob:.17g}"
            for subset, prob in dist
        ]
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w", encoding="ascii") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    rng = RngStream(args.seed)
    if args.count == 1:
        subset, trials = rejection_sample_subset(
            svd, profile, args.k, rng, max_trials=args.max_trials
        )
        rows = [subset.indices]
        print(f"accepted after {trials} proposals")
    else:
        draws, stats = rejection_sample_many(
            svd, profile, args.k, args.count, rng, max_trials=args.max_trials
        )
        rows = [tuple(int(v) for v in row) for row in draws]
        print(
            f"accepted {args.count} subsets from {stats.proposals} proposals "
            f"(rate {stats.acceptance_rate:.4f})"
        )
    text = "\n".join(";".join(str(i) for i in row) for row in rows) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _make_op(kind, n_in, r, seed):
    if kind == "identity":
        return make_identity_sketch(n_in)
    if r is None:
        raise CullsqError("--r is required for srht/sign sketches")
    if kind == "srht":
        return make_srht(n_in, r, RngStream(seed))
    return make_dense_sign_jlt(n_in, r, RngStream(seed))


def _cmd_sketch(args) -> int:
    M = dataio.load_matrix(args.input)
    op = _make_op(args.kind, M.shape[0], args.r, args.seed)
    dataio.save_matrix(args.out, apply_sketch(op, M))
    print(f"sketched {M.shape[0]}x{M.shape[1]} -> {op.r}x{M.shape[1]} ({args.kind})")
    return 0


def _cmd_precond(args) -> int:
    X = dataio.load_matrix(args.x)
    op = _make_op(args.kind, X.shape[0], args.r, args.seed)
    precond = build_preconditioner(X, op)
    if args.out_t:
        dataio.save_matrix(args.out_t, precond.T)
    if args.out_p:
        dataio.save_matrix(args.out_p, precond.permutation_matrix())
    svals = np.linalg.svd(precond.x_times_inverse(X), compute_uv=False)
    summary = {
        "kind": args.kind,
        "r": int(op.r),
        "seed": int(args.seed),
        "singular_values_x_rinv": [float(s) for s in svals],
        "condition_number_x_rinv": float(svals[0] / svals[-1]),
    }
    text = json.dumps(summary, sort_keys=True, indent=2) + "\n"
    if args.out_summary:
        with open(args.out_summary, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_kaczmarz(args) -> int:
    data = Dataset(X=dataio.load_matrix(args.x), y=dataio.load_vector(args.y))
    rng = RngStream(args.seed)
    w_star = None
    if args.trace:
        w_star, _ = full_solve(data)  # oracle solve, test mode only
    if args.mode == "exact":
        run = kaczmarz_exact(thin_svd(data), data.y, args.iters, rng, w_star=w_star)
    else:
        run = kaczmarz_fast(data, args.iters, rng, cfg=FastSolverConfig(), w_star=w_star)
    if args.out:
        dataio.save_vector(args.out, run.w)
    if args.trace:
        with open(args.trace, "w", encoding="ascii") as fh:
            fh.write("t,squared_error\n")
            for t, err in enumerate(run.error_trace):
                fh.write(f"{t},{err:.17g}\n")
    print(
        f"{args.mode} kaczmarz: {run.iterations} iterations, "
        f"{run.labels_used} distinct labels"
    )
    return 0


def _cmd_verify(args) -> int:
    overrides = {
        key: getattr(args, key)
        for key in (
            "n", "d", "k", "design", "noise", "spike_fraction", "trials",
            "mode", "kappa", "iters", "threads", "seed", "out",
        )
    }
    if args.config:
        cfg = ExperimentConfig.from_file(
            args.config, experiment=args.experiment, **overrides
        )
    else:
        fields = dict(_VERIFY_DEFAULTS.get(args.experiment, {}))
        fields.update({k: v for k, v in overrides.items() if v is not None})
        cfg = ExperimentConfig(experiment=args.experiment, **fields)
    report = run_experiment(cfg.validate())
    for crit in report.criteria:
        verdict = "PASS" if crit["passed"] else "FAIL"
        print(
            f"criterion {crit['name']}: {verdict} "
            f"(measured={crit['measured']}, bound={crit['bound']})"
        )
    if cfg.out:
        with open(cfg.out, "w", encoding="ascii") as fh:
            fh.write(report.to_json(include_timings=True))
        print(f"report written to {cfg.out}")
    return 0 if report.passed else 2


_COMMANDS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "reject-sample": _cmd_reject_sample,
    "sketch": _cmd_sketch,
    "precond": _cmd_precond,
    "kaczmarz": _cmd_kaczmarz,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CullsqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
