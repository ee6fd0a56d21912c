"""Command line front end.

Exit codes: 0 success, 1 check failure, 2 usage error, 3 resource error.
Set YULEBST_OUT_DIR to place relative ``--out`` paths in that directory.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys
from dataclasses import dataclass

from . import analysis, constants, oracle, profile, validation, yule
from .errors import ConfigError, ResourceLimitError
from .rng import RandomStream

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3
OUT_DIR_ENV = "YULEBST_OUT_DIR"


def count(text: str) -> int:
    """Integer flag that also takes scientific notation (``1e9``)."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value.is_integer() or value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(value)


def seed_value(text: str) -> int:
    value = float(text) if any(c in text for c in "eE.") else int(text)
    if value < 0 or value != int(value):
        raise argparse.ArgumentTypeError("seed must be a non-negative integer")
    return int(value)


def ratio_value(text: str) -> float:
    value = float(text)
    if not value > 1:
        raise argparse.ArgumentTypeError("ratio must be > 1")
    return value


def tol_value(text: str) -> float:
    value = float(text)
    if not 0 < value <= 1e-6:
        raise argparse.ArgumentTypeError("tolerance must lie in (0, 1e-6]")
    return value


@dataclass
class RunConfig:
    subcommand: str
    n_max: int
    members: int
    base_seed: int
    ratio: float
    out: str | None
    fmt: str
    tolerance: float

    def __post_init__(self):
        if self.n_max < 1 or self.members < 1 or not self.ratio > 1 or self.fmt not in ("csv", "json"):
            raise ConfigError(f"invalid run config {self}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="yulebst", description="Random BST / Yule tree simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, n_default=None, fmt="csv"):
        p.add_argument("--n", type=count, default=n_default)
        p.add_argument("--seed", type=seed_value, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("csv", "json"), default=fmt)
        return p

    p = sub.add_parser("constants", help="solve for a, b, alpha, beta")
    p.add_argument("--tol", type=tol_value, default=constants.DEFAULT_TOL)
    p.add_argument("--out", default=None)

    p = common(sub.add_parser("run", help="trajectory CSV"), 10**6)
    p.add_argument("--ratio", type=ratio_value, default=1.05)

    p = common(sub.add_parser("fringe", help="fringe trace CSV (H, H-1, H-2 counts)"), 10**7)
    p.add_argument("--ratio", type=ratio_value, default=1.05)
    p.add_argument("--check-lemma", action="store_true")

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("--seed", type=seed_value, default=None)
    p.add_argument("--quick", action="store_true")
    p.add_argument("--json", action="store_true")
    p.add_argument("--jobs", type=count, default=1)
    p.add_argument("--check", action="append", choices=sorted(validation.CHECKS))
    p.add_argument("--out", default=None)

    p = common(sub.add_parser("ensemble", help="ensemble summary JSON"), 10**6, "json")
    p.add_argument("--members", type=count, default=200)
    p.add_argument("--jobs", type=count, default=1)
    p.add_argument("--ratio", type=ratio_value, default=1.05)

    p = sub.add_parser("exact", help="exact distribution table JSON")
    p.add_argument("--n", type=count, required=True)
    p.add_argument("--statistic", choices=oracle.STATISTICS, default="joint")
    p.add_argument("--out", default=None)

    p = common(sub.add_parser("zeta", help="samples of T_n - log n as CSV"), 10**6)
    p.add_argument("--members", type=count, default=10**4, help="number of samples")

    p = sub.add_parser("psi", help="Monte Carlo check of the exponential moment")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--trials", type=count, default=10**5)
    p.add_argument("--seed", type=seed_value, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("hitting", help="first fringe hitting times JSON")
    p.add_argument("--n", type=count, default=10**7)
    p.add_argument("--k-max", type=count, default=8)
    p.add_argument("--seed", type=seed_value, default=None)
    p.add_argument("--out", default=None)
    return parser


@contextlib.contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
        sys.stdout.flush()
        return
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yield fh


def _seed(args) -> int:
    if args.seed is None:
        print("warning: no --seed given, using seed 0", file=sys.stderr)
        return 0
    return args.seed


def cmd_constants(args) -> int:
    try:
        c = constants.solve_constants(args.tol)
    except ArithmeticError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_CHECK
    with _output(args.out) as fh:
        fh.write(json.dumps(c.as_dict()) + "\n")
    return EXIT_OK if c.within_tolerance() else EXIT_CHECK


def cmd_run(args) -> int:
    seed = _seed(args)
    schedule = profile.checkpoint_schedule(args.n, args.ratio)
    records = analysis.recentred_trajectory(RandomStream(seed, 0), args.n, schedule)
    with _output(args.out) as fh:
        if args.format == "csv":
            profile.write_records_csv(records, fh)
        else:
            for rec in records:
                fh.write(json.dumps(rec.__dict__) + "\n")
                fh.flush()
    return EXIT_OK


def cmd_fringe(args) -> int:
    seed = _seed(args)
    if args.n < 2:
        print("fringe needs --n >= 2", file=sys.stderr)
        return EXIT_USAGE
    schedule = profile.checkpoint_schedule(args.n, args.ratio)
    with _output(args.out) as fh:
        if args.format == "csv":
            fh.write(",".join(analysis.FRINGE_FIELDS) + "\n")

            def sink(row):
                fh.write(",".join(map(str, row)) + "\n")
                fh.flush()
            trace = analysis.fringe_trace(RandomStream(seed, 0), args.n, 3, schedule, sink=sink)
        else:
            trace = analysis.fringe_trace(RandomStream(seed, 0), args.n, 3, schedule)
            fh.write(json.dumps({"rows": trace.rows, "stats": trace.stats.__dict__}) + "\n")
    if args.check_lemma:
        st = trace.stats
        print(f"frontier lemma: {st.lemma_fail} failures, {st.lemma_pass} passes, "
              f"{st.lemma_not_applicable} not applicable", file=sys.stderr)
        if st.lemma_fail:
            return EXIT_CHECK
    return EXIT_OK


def cmd_validate(args) -> int:
    seed = _seed(args)
    scale = validation.Scale.quick() if args.quick else validation.Scale()
    results = []
    for name in args.check or validation.CHECKS:
        if name == "asymptotics":
            t0 = validation.time.perf_counter()
            ok, detail = validation.check_asymptotics(scale, seed, args.jobs)
            res = validation.CheckResult(name, ok, detail, validation.time.perf_counter() - t0)
        else:
            res = validation.run_check(name, scale, seed)
        results.append(res)
        if not args.json:
            print(res.line(), file=sys.stderr)
    ok = all(r.passed for r in results)
    with _output(args.out) as fh:
        if args.json:
            report = {"seed": seed, "quick": args.quick, "passed": ok,
                      "checks": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]}
            fh.write(json.dumps(report, default=float) + "\n")
        else:
            fh.write(("all checks passed" if ok else "some checks FAILED") + "\n")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_ensemble(args) -> int:
    seed = _seed(args)
    if args.n < 3:
        print("ensemble needs --n >= 3", file=sys.stderr)
        return EXIT_USAGE
    summary = analysis.ensemble_run(analysis.EnsembleConfig(args.n, args.members, seed, args.ratio, 0.1, args.jobs))
    with _output(args.out) as fh:
        fh.write(summary.to_json() + "\n")
    return EXIT_OK


def cmd_exact(args) -> int:
    table = oracle.exact_distribution(args.n, args.statistic)
    with _output(args.out) as fh:
        fh.write(table.to_json() + "\n")
    return EXIT_OK


def cmd_zeta(args) -> int:
    seed = _seed(args)
    if args.n < 100:
        print("zeta needs --n >= 100", file=sys.stderr)
        return EXIT_USAGE
    z = yule.zeta_samples(RandomStream(seed, 0), args.n, args.members)
    with _output(args.out) as fh:
        fh.write("sample_index,value\n")
        for i, v in enumerate(z):
            fh.write(f"{i},{float(v)!r}\n")
    return EXIT_OK


def cmd_psi(args) -> int:
    seed = _seed(args)
    mean, se = yule.psi_mc_estimate(args.theta, args.trials, RandomStream(seed, 0))
    closed = constants.psi(args.theta)
    z = (mean - closed) / se
    with _output(args.out) as fh:
        fh.write(json.dumps({"theta": args.theta, "mc_mean": mean, "stderr": se,
                             "closed_form": closed, "z_score": z}) + "\n")
    return EXIT_OK if abs(z) <= 3 else EXIT_CHECK


def cmd_hitting(args) -> int:
    seed = _seed(args)
    if args.n < 2:
        print("hitting needs --n >= 2", file=sys.stderr)
        return EXIT_USAGE
    hits = analysis.fringe_hitting_times(RandomStream(seed, 0), args.n, args.k_max)
    with _output(args.out) as fh:
        fh.write(hits.to_json() + "\n")
    return EXIT_OK


COMMANDS = {
    "constants": cmd_constants, "run": cmd_run, "fringe": cmd_fringe, "validate": cmd_validate,
    "ensemble": cmd_ensemble, "exact": cmd_exact, "zeta": cmd_zeta, "psi": cmd_psi, "hitting": cmd_hitting,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceLimitError, MemoryError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
