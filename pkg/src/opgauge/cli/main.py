"""Command-line entry point: ``opgauge verify | converge | residual-map``.

Exit status: 0 when every asserted check passes, 1 when any fails, 2 for
bad input (unreadable or schema-invalid scenario, bad flags), 3 when the
numerical engine hits a capability or range limit.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from ..errors import CapabilityError, ConditioningError, RangeError, ScenarioError
from . import scenario as sc
from . import suite

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_CAPABILITY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INPUT)


def _grid_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid list must be integers, got {text!r}") from None
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="opgauge", description="Operator gauge symmetry verification suite.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario JSON file or bundled scenario name")
        p.add_argument("--out", default=".", help="output directory (default: current directory)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--dim", type=int, help="override the matrix dimension (random fields only)")
        p.add_argument("--tol-scale", type=float, default=1.0, help="multiply every upper-bound tolerance")

    p = sub.add_parser("verify", help="run the invariant suite and write report.json")
    common(p)
    p = sub.add_parser("converge", help="lattice convergence study; writes report.json and convergence.csv")
    common(p)
    p.add_argument("--grids", type=_grid_list, help="grid sizes, e.g. '8,16,32' (default: scenario lattice grids)")
    p = sub.add_parser("residual-map", help="per-site residual CSV for one check")
    common(p)
    p.add_argument("--check", required=True, help=f"one of: {', '.join(sorted(suite.MAPS))}")
    p.add_argument("--grid", type=int, help="points per direction of the cubic grid")
    sub.add_parser("list", help="list bundled scenarios and check ids")
    return parser


def write_report(report: dict, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(json.dumps(report, indent=2) + "\n")
    return path


def _summary_line(report: dict) -> str:
    checks = report["checks"]
    failed = [c["id"] for c in checks if c["status"] == "fail"]
    passed = sum(c["status"] == "pass" for c in checks)
    line = f"{report['scenario']}: {report['overall'].upper()} ({passed} passed, {len(failed)} failed)"
    if failed:
        line += " failing: " + ", ".join(failed)
    return line


def _run(args) -> int:
    if args.command == "list":
        print("bundled scenarios: " + ", ".join(sc.bundled_names()))
        print("checks: " + ", ".join(suite.CHECK_IDS))
        print("residual maps: " + ", ".join(sorted(suite.MAPS)))
        return EXIT_PASS
    scen = sc.load_scenario(args.scenario, seed=args.seed, dim=args.dim)
    out = Path(args.out)
    if args.command == "verify":
        report = suite.run_verify(scen, tol_scale=args.tol_scale)
        path = write_report(report, out)
        print(_summary_line(report))
        print(f"report: {path}")
        return EXIT_PASS if report["overall"] == "pass" else EXIT_FAIL
    if args.command == "converge":
        report, rows = suite.run_converge(scen, args.grids)
        path = write_report(report, out)
        table = out / "convergence.csv"
        with open(table, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
        for rec in report["checks"]:
            slope = "n/a" if rec["slope"] is None else f"{rec['slope']:.3f}"
            print(f"{rec['id']}: {rec['classification']} slope={slope} {rec['status'].upper()}")
        print(f"report: {path}\ntable: {table}")
        return EXIT_PASS if report["overall"] == "pass" else EXIT_FAIL
    # residual-map
    if args.grid is None:
        raise ScenarioError("residual-map needs --grid N")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"residual_{args.check}.csv"
    suite.run_residual_map(scen, args.check, args.grid, path)
    print(f"residual map: {path}")
    return EXIT_PASS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ScenarioError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CapabilityError, RangeError, ConditioningError) as exc:
        print(f"numerical capability error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY


if __name__ == "__main__":
    sys.exit(main())
