"""Command line: ``chaplygin run <scenario>`` and ``chaplygin verify <suite>``.

Exit codes: 0 success, 1 failed checks, 2 parse error or unknown suite,
3 validation error, 4 numerical guard tripped.  Errors are reported as one
JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .checks import SUITES, run_suite
from .dynamics import IntegrationGuardError
from .oracle import ConstraintDriftError
from .report import run_scenario, write_outputs
from .scenario import ScenarioParseError, ScenarioValidationError, load_scenario

OUT_ENV = "CHAPLYGIN_OUT"
EXIT_FAIL, EXIT_PARSE, EXIT_VALIDATION, EXIT_GUARD = 1, 2, 3, 4


def _error(kind: str, reason: str, code: int) -> int:
    print(json.dumps({"error": kind, "reason": reason}), file=sys.stderr)
    return code


def _out_dir(flag: str | None, default: Path) -> Path:
    if flag:
        return Path(flag)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    return default


def cmd_run(args) -> int:
    try:
        sc = load_scenario(args.scenario)
    except ScenarioParseError as exc:
        return _error("parse", str(exc), EXIT_PARSE)
    except ScenarioValidationError as exc:
        return _error("validation", str(exc), EXIT_VALIDATION)
    try:
        traj, report = run_scenario(sc)
    except (IntegrationGuardError, ConstraintDriftError) as exc:
        return _error("guard", str(exc), EXIT_GUARD)
    out = _out_dir(args.out, Path.cwd())
    tpath, rpath = write_outputs(traj, report, out, Path(args.scenario).stem)
    print(f"trajectory: {tpath}")
    print(f"report: {rpath}")
    d = report["drifts"]
    print(f"H_c drift {d['H_c']:.3e}; max J_H drift {max(d['J_H'], default=0.0):.3e}; "
          f"oracle deviation {report['oracle']['max_deviation']:.3e}; "
          f"straight line {report['straight_line']['flag']}")
    return 0


def _parse_ns(text: str):
    try:
        ns = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n list {text!r}") from None
    if not ns or min(ns) < 3:
        raise argparse.ArgumentTypeError("n values must be integers >= 3")
    return ns


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        return _error("parse", f"unknown suite {args.suite!r}; choose from {sorted(SUITES)}", EXIT_PARSE)
    report = run_suite(args.suite, args.n, args.seed)
    for r in report.results:
        print(r.line())
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: suite {args.suite}, {len(report.results)} checks, "
          f"{len(report.failures)} failed, {report.elapsed:.1f} s")
    out = _out_dir(args.out, None) if (args.out or os.environ.get(OUT_ENV)) else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"verify-{args.suite}.json"
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        print(f"report: {path}")
    return 0 if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaplygin", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="integrate a scenario file")
    run.add_argument("scenario")
    run.add_argument("--out", help=f"output directory (default ${OUT_ENV} or the working directory)")
    run.set_defaults(func=cmd_run)
    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("suite", help=f"one of {', '.join(sorted(SUITES))}")
    ver.add_argument("--n", type=_parse_ns, default=[3, 4], help="comma separated, default 3,4")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--out", help=f"directory for the JSON report (or ${OUT_ENV})")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
