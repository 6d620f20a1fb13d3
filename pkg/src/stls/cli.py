"""Command line front end: solve JSON instances, run benchmark suites.

Set STLS_NUM_THREADS to cap the BLAS thread pool; it is applied before
numpy is imported.
"""

import argparse
import json
import os
import sys

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _cap_threads():
    cap = os.environ.get("STLS_NUM_THREADS")
    if cap:
        for var in _THREAD_VARS:
            os.environ.setdefault(var, cap)


def _int_list(text: str) -> tuple:
    return tuple(int(part) for part in text.split(","))


def _float_list(text: str) -> tuple:
    return tuple(float(part) for part in text.split(","))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stls",
        description="Nearest structured rank-deficient matrix via semidefinite relaxation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve one instance from a JSON file")
    solve.add_argument("file", help="JSON instance: structure descriptor, theta, optional weight")
    solve.add_argument("--feas-tol", type=float, default=1e-8)
    solve.add_argument("--gap-tol", type=float, default=1e-8)
    solve.add_argument("--max-iter", type=int, default=200)

    bench = sub.add_parser("bench", help="run a benchmark suite")
    bench.add_argument(
        "suite",
        choices=(
            "hankel-random",
            "realization",
            "realization-missing",
            "gcd",
            "triangulation",
            "resectioning",
        ),
    )
    bench.add_argument("--trials", type=int, default=None)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--noise", type=_float_list, default=None, metavar="A,B,C")
    bench.add_argument(
        "--size",
        type=_int_list,
        default=None,
        metavar="N,...",
        help="matrix columns (Hankel suites) or camera/point count; ignored by gcd",
    )
    bench.add_argument("--m", type=int, default=3, help="rows, hankel-random only")
    bench.add_argument("--pattern", choices=("mod5", "mod10"), default="mod5")
    bench.add_argument("--cameras", choices=("sphere", "line"), default="sphere")
    bench.add_argument("--baseline", action="store_true", help="also run the local method")
    bench.add_argument("--csv", metavar="PATH", help="write the table as CSV")
    return parser


def cmd_solve(args) -> int:
    from stls.extract import solve_instance
    from stls.sdp import SolverConfig
    from stls.structure import instance_from_descriptor

    try:
        with open(args.file) as fp:
            descriptor = json.load(fp)
        instance = instance_from_descriptor(descriptor)
        config = SolverConfig(
            feas_tol=args.feas_tol, gap_tol=args.gap_tol, max_iter=args.max_iter
        )
        solution = solve_instance(instance, config)
    except (OSError, json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(solution.to_json())
    return 0 if solution.certified else 2


def cmd_bench(args) -> int:
    from stls.experiments import default_spec, format_csv, format_table, run_bench

    overrides = {
        "seed": args.seed,
        "m": args.m,
        "pattern": args.pattern,
        "camera_layout": args.cameras,
        "baseline": args.baseline,
    }
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.noise is not None:
        overrides["noise_levels"] = args.noise
    if args.size is not None:
        overrides["sizes"] = args.size
    try:
        spec = default_spec(args.suite, **overrides)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    cells = run_bench(spec, log=sys.stderr)
    sys.stdout.write(format_table(cells))
    if args.csv:
        with open(args.csv, "w") as fp:
            fp.write(format_csv(cells))
    return 0


def main(argv=None) -> int:
    _cap_threads()
    args = _build_parser().parse_args(argv)
    if args.command == "solve":
        return cmd_solve(args)
    return cmd_bench(args)


if __name__ == "__main__":
    sys.exit(main())
