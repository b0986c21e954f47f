"""Command-line interface.

Subcommands: kernel-check, compare, swissroll, transform-check, bounds,
contraction, w2. Global flags: --config PATH, --seed U64, --out DIR,
--threads N, --save-every K. Exit code 0 iff all checks pass.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import experiments as ex
from .config import load_config
from .errors import SdelabError
from .wasserstein import (bootstrap_stderr, w2_assignment, w2_auto,
                          w2_sinkhorn, w2_sorted_1d)

_RUNNERS = {
    "kernel-check": ex.run_kernel_check,
    "compare": ex.run_compare,
    "swissroll": ex.run_swissroll,
    "transform-check": ex.run_transform_check,
    "bounds": ex.run_bounds,
    "contraction": ex.run_contraction,
}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdelab",
                                description=__doc__.splitlines()[0])
    p.add_argument("--config", help="experiment config file (INI grammar)")
    p.add_argument("--seed", type=int, help="override [sampler] seed")
    p.add_argument("--out", help="override [output] dir")
    p.add_argument("--threads", type=int, help="worker threads for sweep cells")
    p.add_argument("--save-every", type=int, dest="save_every",
                   help="snapshot thinning: keep every K-th step")
    sub = p.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        sub.add_parser(name, help=f"run the {name} report")
    w2p = sub.add_parser("w2", help="Wasserstein-2 between two sample CSVs")
    w2p.add_argument("--a", required=True, help="first sample CSV (rows = points)")
    w2p.add_argument("--b", required=True, help="second sample CSV")
    w2p.add_argument("--method", default="auto",
                     choices=["auto", "sorted1d", "assignment", "sinkhorn"])
    w2p.add_argument("--reg", type=float, default=None,
                     help="entropic regularization (sinkhorn)")
    w2p.add_argument("--iters", type=int, default=2000)
    w2p.add_argument("--bootstrap", type=int, default=0,
                     help="bootstrap resamples for a standard error")
    return p


def _overrides(args) -> dict:
    return {
        "sampler.seed": args.seed,
        "output.dir": args.out,
        "run.threads": args.threads,
        "run.save_every": args.save_every,
    }


def _run_w2(args) -> int:
    a = np.loadtxt(args.a, delimiter=",", ndmin=2)
    b = np.loadtxt(args.b, delimiter=",", ndmin=2)
    if args.method == "auto":
        report = w2_auto(a, b)
    elif args.method == "sorted1d":
        report = w2_sorted_1d(a, b)
    elif args.method == "assignment":
        report = w2_assignment(a, b)
    else:
        scale2 = float(np.var(np.vstack([a, b])))
        reg = args.reg if args.reg is not None else 1e-3 * max(scale2, 1e-12)
        report = w2_sinkhorn(a, b, reg=reg, iters=args.iters)
    if args.bootstrap > 0:
        est = {"sorted1d": w2_sorted_1d, "assignment": w2_assignment}.get(
            report.method, lambda x, y: w2_auto(x, y))
        report.stderr = bootstrap_stderr(a, b, est, n_boot=args.bootstrap)
    se = f" +/- {report.stderr:.6g}" if report.stderr is not None else ""
    flag = "" if report.converged else " [not converged]"
    print(f"w2 = {report.value:.9g}{se} (method={report.method}, n={report.n}){flag}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "w2":
            return _run_w2(args)
        cfg = load_config(args.config, overrides=_overrides(args))
        result = _RUNNERS[args.command](cfg)
    except SdelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in result.lines:
        print(line)
    for f in result.files:
        print(f"wrote {f}")
    print("STATUS: " + ("PASS" if result.ok else "FAIL"))
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
