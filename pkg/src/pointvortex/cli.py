"""Command-line entry point.

    pointvortex run CONFIG [--out-dir DIR] [--stride S] [--strict]
    pointvortex scenarios list
    pointvortex scenarios run NAME [--out-dir DIR] [--stride S] [--strict]
    pointvortex sweep GLOB [--out-dir DIR] [--workers K] [--stride S] [--strict]
    pointvortex kernel-check [--seed N]

Exit status: 0 reached t_end, 10 pair collapse, 11 boundary collapse,
12 step underflow, 13 certificate violation under --strict, 2 bad input,
1 failed kernel checks or a sweep with any nonzero run.
"""
from __future__ import annotations

import argparse
import glob
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import ConfigError, PointVortexError, UnknownScenarioError
from .io import EXIT_CONFIG


def _load(path: str):
    from .config import parse_config

    try:
        text = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)


def _summary(report) -> str:
    m = report.metadata
    term = m["termination"]
    line = f"{term['kind']} at t={term['t']!r}"
    if m.get("t_hat") is not None:
        line += f", extrapolated T={m['t_hat']!r}"
    if "verdict" in m:
        line += ", verdict " + ("PASS" if m["verdict"]["passed"] else "FAIL")
    return line + f" -> {report.paths['metadata'].parent}"


def cmd_run(args) -> int:
    from .io import run

    rc = _load(args.config)
    report = run(rc, out_dir=args.out_dir, stride=args.stride, strict=args.strict)
    print(_summary(report))
    return report.exit_code


def cmd_scenarios_list(args) -> int:
    from .scenarios import builtin_scenarios

    for s in builtin_scenarios():
        tag = " [exploratory]" if s.exploratory else ""
        print(f"{s.name:26s} {s.description}{tag}")
    return 0


def cmd_scenarios_run(args) -> int:
    from .io import run_scenario_by_name

    out = args.out_dir or str(Path("out") / args.name)
    report = run_scenario_by_name(args.name, out_dir=out, stride=args.stride, strict=args.strict)
    print(_summary(report))
    for c in report.metadata["verdict"]["checks"]:
        status = "ok  " if c["passed"] else "FAIL"
        print(f"  {status} {c['name']}: measured {c['measured']!r}, expected {c['expected']!r} "
              f"(tol {c['tolerance']!r})")
    code = report.exit_code
    if not report.metadata["verdict"]["passed"] and code == 0:
        code = 1
    return code


def _sweep_one(job):
    path, out_dir, stride, strict = job
    from .io import run

    try:
        rc = _load(path)
    except ConfigError as exc:
        return path, EXIT_CONFIG, str(exc)
    report = run(rc, out_dir=out_dir, stride=stride, strict=strict)
    return path, report.exit_code, _summary(report)


def cmd_sweep(args) -> int:
    paths = sorted(glob.glob(args.pattern))
    if not paths:
        print(f"no configuration matches {args.pattern!r}", file=sys.stderr)
        return EXIT_CONFIG
    root = Path(args.out_dir or "sweep")
    jobs = [(p, str(root / Path(p).stem), args.stride, args.strict) for p in paths]
    worst = 0
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        for path, code, msg in pool.map(_sweep_one, jobs):
            print(f"[{code:2d}] {path}: {msg}")
            worst = max(worst, code)
    return 0 if worst == 0 else 1


def cmd_kernel_check(args) -> int:
    from .checks import gradient_checks, kernel_identity_checks

    results = kernel_identity_checks(args.seed, n_pairs=args.pairs) + gradient_checks(args.seed, n=args.samples)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pointvortex", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("--out-dir", help="output directory (default: from config, or out/NAME)")
        sp.add_argument("--stride", type=float, help="override the output sample stride")
        sp.add_argument("--strict", action="store_true",
                        help="exit 13 when a certificate or drift-bound margin is violated")

    r = sub.add_parser("run", help="integrate a JSON configuration")
    r.add_argument("config")
    run_flags(r)
    r.set_defaults(func=cmd_run)

    sc = sub.add_parser("scenarios", help="list or run builtin scenarios")
    scs = sc.add_subparsers(dest="action", required=True)
    scs.add_parser("list").set_defaults(func=cmd_scenarios_list)
    sr = scs.add_parser("run")
    sr.add_argument("name")
    run_flags(sr)
    sr.set_defaults(func=cmd_scenarios_run)

    sw = sub.add_parser("sweep", help="run every configuration matching a glob in parallel")
    sw.add_argument("pattern")
    sw.add_argument("--workers", type=int, default=None)
    run_flags(sw)
    sw.set_defaults(func=cmd_sweep)

    kc = sub.add_parser("kernel-check", help="randomized kernel identity and gradient checks")
    kc.add_argument("--seed", type=int, default=0)
    kc.add_argument("--pairs", type=int, default=100_000)
    kc.add_argument("--samples", type=int, default=10_000)
    kc.set_defaults(func=cmd_kernel_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnknownScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PointVortexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
