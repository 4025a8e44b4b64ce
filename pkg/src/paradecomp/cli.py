"""Command-line front end: ``run``, ``converge``, ``verify`` and ``cheb``.

Exit codes: 0 success, 1 a check or run failed, 2 usage/configuration
error. Every subcommand also accepts ``--config FILE`` with one
``key = value`` per line (keys are the long option names, dashes or
underscores); command-line flags override the file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import chebyshev, mms, oracle
from .errors import ConfigurationError, SolveError

OUTDIR_ENV = "PARADECOMP_OUTDIR"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    """``"20,40,80"`` or an inclusive range ``"0..5"``."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or a range a..b, got {text!r}")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def fmt(x) -> str:
    return f"{x:.17g}"


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file; flags take precedence")
    p.add_argument("--threads", type=int, default=1, help="worker threads (0 = auto)")
    p.add_argument("--outdir", help=f"output directory (default: ${OUTDIR_ENV} or .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paradecomp",
        description="Parallel decomposition scheme for second-order evolution equations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single simulation of a manufactured case")
    _common(p)
    p.add_argument("--case", choices=sorted(mms.CASES))
    p.add_argument("--n", type=int, help="divisions per side (default: reference resolution or 20)")
    p.add_argument("--tau", type=float, help="time step override (default 1/n)")
    p.add_argument("--eta", type=_floats, help="weights, e.g. 0.3,0.7")
    p.add_argument("--store-trajectory", type=_bool, nargs="?", const=True, default=False,
                   help="write one CSV per time level")
    p.add_argument("--corrected-start", type=_bool, nargs="?", const=True, default=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("converge", help="refinement sweep with tau = h")
    _common(p)
    p.add_argument("--case", choices=sorted(mms.CASES))
    p.add_argument("--n", type=_ints, default=[20, 40, 80, 160], help="e.g. 20,40,80,160")
    p.add_argument("--eta", type=_floats)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("verify", help="randomised dense-matrix certification")
    _common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=200, help="random workspaces")
    p.add_argument("--problems", type=int, help="dense manufactured runs (default: min(10, count))")
    p.add_argument("--k-max", type=int, default=64)
    p.add_argument("--eta", type=_floats, help="force these weights on every workspace")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cheb", help="Chebyshev value/bound table as CSV")
    _common(p)
    p.add_argument("--k", type=_ints, default=list(range(6)), help="degrees, e.g. 0..5")
    p.add_argument("--x", type=_floats, default=[0.5])
    p.add_argument("--y", type=_floats, default=[1.0])
    p.add_argument("--classical", type=_bool, nargs="?", const=True, default=False,
                   help="evaluate U_k(x) instead of the two-variable polynomial")
    p.add_argument("--out", help="also write the table to this file")
    p.set_defaults(func=cmd_cheb)
    return parser


def read_config(path: str, sub: argparse.ArgumentParser) -> dict:
    """Parse a flat ``key = value`` file against the options of ``sub``."""
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config", "func")}
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}")
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        dest = key.replace("-", "_")
        if dest not in actions:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        action = actions[dest]
        try:
            conv = action.type(val) if action.type is not None else val
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key!r}: {exc}")
        if action.choices is not None and conv not in action.choices:
            raise UsageError(f"{path}:{lineno}: {key!r} must be one of {sorted(action.choices)}")
        values[dest] = conv
    return values


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**read_config(args.config, sub))
        args = parser.parse_args(argv)
    if args.threads < 0:
        raise UsageError("--threads must be >= 0")
    return args


def outdir(args) -> str:
    d = args.outdir or os.environ.get(OUTDIR_ENV) or "."
    os.makedirs(d, exist_ok=True)
    return d


def cmd_run(args) -> int:
    if not args.case:
        raise UsageError("run: --case is required")
    case = mms.get_case(args.case)
    n = args.n or mms.REFERENCE_RESOLUTION.get(args.case, 20)
    d = outdir(args)
    snap_dir = os.path.join(d, "snapshots")
    x = y = None
    if args.store_trajectory:
        os.makedirs(snap_dir, exist_ok=True)
        from .splitting import Grid

        x, y = Grid.unit_square(n - 1).nodes()

    tau_used = args.tau if args.tau else case.t_final / n

    def snapshot(k, v):
        u = case.exact(x, y, k * tau_used)
        with open(os.path.join(snap_dir, f"layer_{k:05d}.csv"), "w") as fh:
            fh.write("x,y,v,exact\n")
            for xi, yi, vi, ui in zip(x.ravel(), y.ravel(), v.ravel(), u.ravel()):
                fh.write(f"{fmt(xi)},{fmt(yi)},{fmt(vi)},{fmt(ui)}\n")

    try:
        res = mms.solve_case(
            case, n, etas=args.eta, threads=args.threads, tau=args.tau,
            corrected_start=args.corrected_start,
            callback=snapshot if args.store_trajectory else None,
        )
    except SolveError as exc:
        print(f"run: numerical failure at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    path = os.path.join(d, "summary.csv")
    with open(path, "w") as fh:
        fh.write(f"# case = {args.case}\n")
        fh.write(f"# eta = {','.join(fmt(e) for e in res.etas)}\n")
        fh.write(f"# corrected_start = {str(args.corrected_start).lower()}\n")
        fh.write(f"# deriv_error = {fmt(res.errors.deriv_error)}\n")
        fh.write(mms.CSV_HEADER + "\n")
        fh.write(mms.csv_row(res) + "\n")
    print(f"{args.case} n={n} max_error={fmt(res.errors.max_error)} -> {path}")
    return EXIT_OK


def cmd_converge(args) -> int:
    if not args.case:
        raise UsageError("converge: --case is required")
    if any(n < 2 for n in args.n):
        raise UsageError("converge: every n must be >= 2")
    report = mms.convergence_study(mms.get_case(args.case), args.n, etas=args.eta, threads=args.threads)
    paths = mms.write_report(report, outdir(args))
    if report.insufficient:
        print(f"{args.case}: insufficient data for a slope ({len(report.rows)} rows)")
    else:
        print(f"{args.case}: order = {fmt(report.order)} -> {paths['slope']}")
    if not report.complete:
        print(f"converge: sweep aborted: {report.failure}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _json_safe(rec: dict) -> dict:
    return {
        k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in rec.items()
    }


def cmd_verify(args) -> int:
    problems = min(10, args.count) if args.problems is None else args.problems
    if args.count < 0 or problems < 0:
        raise UsageError("verify: --count and --problems must be >= 0")
    threads = args.threads or (os.cpu_count() or 1)
    records = oracle.run_suite(
        args.count, args.seed, threads=threads, etas=args.eta, k_max=args.k_max,
        problems=problems,
    )
    path = os.path.join(outdir(args), "verify.jsonl")
    failed = 0
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(_json_safe(rec.as_json()), sort_keys=True) + "\n")
            failed += not rec.passed
    print(f"verify: {len(records)} checks, {failed} failed -> {path}")
    return EXIT_FAIL if failed else EXIT_OK


def cheb_rows(ks, xs, ys, classical: bool) -> list[str]:
    rows = []
    if classical:
        rows.append("k,x,value,bound")
        for k in ks:
            for x in xs:
                val = chebyshev.u_classical(k, x)
                bound = 1.0 / math.sqrt(1.0 - x * x) if abs(x) < 1 else math.inf
                rows.append(f"{k},{fmt(x)},{fmt(val)},{fmt(bound)}")
    else:
        rows.append("k,x,y,value,bound")
        for k in ks:
            for x in xs:
                for y in ys:
                    val = chebyshev.u2_eval(k, x, y)
                    bound = chebyshev.two_variable_bound(k, x, y)
                    rows.append(f"{k},{fmt(x)},{fmt(y)},{fmt(val)},{fmt(bound)}")
    return rows


def cmd_cheb(args) -> int:
    if any(k < 0 for k in args.k):
        raise UsageError("cheb: degrees must be >= 0")
    rows = cheb_rows(args.k, args.x, args.y, args.classical)
    text = "\n".join(rows) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = parse(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"paradecomp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        where = f" (weight index {exc.index})" if exc.index is not None else ""
        print(f"paradecomp: configuration error{where}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
