"""Command line entry point: ``lcsgeo run <command> <fixture> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import __version__
from .manifold_file import ManifoldFileError, SamplingError, fixture_names, load_manifold, sample_points
from .verify import COMMANDS, run


def _window(text: str) -> tuple[str, tuple[float, float]]:
    try:
        name, rng = text.split("=", 1)
        lo, hi = rng.split(":", 1)
        return name.strip(), (float(lo), float(hi))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like z=1:4, got {text!r}") from None


def _param(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"parameter must look like c=2, got {text!r}")
    name, value = text.split("=", 1)
    return name.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcsgeo", description="Verify geometric identities on chart fixtures.")
    parser.add_argument("--version", action="version", version=f"lcsgeo {__version__}")
    sub = parser.add_subparsers(dest="action", required=True)

    r = sub.add_parser("run", help="run a verification command on a manifold file")
    r.add_argument("command", choices=COMMANDS)
    r.add_argument("fixture", help="path to a manifold file, or fixtures/<name> for a bundled one")
    r.add_argument("--tol", type=float, default=1e-9, help="residual tolerance (default 1e-9)")
    r.add_argument("--seed", type=int, default=None, help="random sample seed (default: the file's, else 0)")
    r.add_argument("--points", type=int, default=None, help="number of random points added to the grid")
    r.add_argument("--json", metavar="PATH", help="also write the report as JSON")
    r.add_argument("--window", type=_window, action="append", default=[], help="range override, e.g. z=1:4")
    r.add_argument("--param", type=_param, action="append", default=[], help="fixture parameter, e.g. c=2")
    r.add_argument("--timing", action="store_true", help="print elapsed time (makes output run-dependent)")

    sub.add_parser("fixtures", help="list bundled fixtures")
    return parser


def format_text(report: dict, tol: float) -> str:
    lines = [
        f"lcsgeo {report['version']}  fixture={report['fixture']}  command={report['command']}  "
        f"points={report['points']}  tol={tol:g}",
    ]
    conv = report["conventions"]
    lines.append(f"  curvature: {conv['riemann_sign']}")
    lines.append(f"  ricci:     {conv['ricci']}")
    lines.append(f"  laplacian: {conv['laplacian_sign']}")
    lines.append(f"  signature: {conv['signature']}")
    for suite in report["suites"]:
        mark = "PASS" if suite["pass"] else "FAIL"
        lines.append("")
        lines.append(f"[{mark}] {suite['name']}  residual_max={suite['residual_max']:.3e}")
        for c in suite["checks"]:
            res = "-" if c["residual_max"] is None else f"{c['residual_max']:.3e}"
            extra = f"  {c['detail']}" if c["detail"] else ""
            lines.append(f"    {c['name']:<28} {res:>11}  {c['status']}{extra}")
        for note in suite["notes"]:
            lines.append(f"    note: {note}")
    lines.append("")
    lines.append(f"overall: {'PASS' if report['pass'] else 'FAIL'}")
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.action == "fixtures":
        for name in fixture_names():
            print(name)
        return 0

    start = time.perf_counter()
    try:
        loaded = load_manifold(args.fixture, dict(args.param) or None)
        points = sample_points(
            loaded.manifold, loaded.sampling, seed=args.seed, count=args.points, ranges=dict(args.window)
        )
    except (OSError, ManifoldFileError, SamplingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run(args.command, loaded, points, args.tol)
    sys.stdout.write(format_text(report, args.tol))
    if args.timing:
        print(f"elapsed: {time.perf_counter() - start:.2f} s")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
