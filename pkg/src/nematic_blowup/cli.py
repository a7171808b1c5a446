"""Command line: nematic-blowup {run, verify, sweep, resume}."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import ConfigurationError
from .runner import format_checks, resume, run, sweep, verify


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nematic-blowup", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run one trajectory"), ("verify", "run the invariant checks"),
                           ("sweep", "run the cartesian product of the sweep axes")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="YAML run configuration")
        if name != "verify":
            p.add_argument("--out", required=True, help="output directory")
        if name == "sweep":
            p.add_argument("--threads", type=int, default=1, help="concurrent trajectories")
    p = sub.add_parser("resume", help="continue a run from its checkpoint")
    p.add_argument("--out", required=True, help="directory of the interrupted run")
    p.add_argument("--max-steps", type=int, default=None, help="step cap for the resumed run")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "resume":
            sim = resume(args.out, args.max_steps)
            print(f"stop reason: {sim.stop_reason}  t = {sim.state.t:.6g}  steps = {sim.state.steps}")
            return 0
        cfg = load_config(args.config)
        if args.command == "run":
            sim = run(cfg, args.out)
            print(f"stop reason: {sim.stop_reason}  t = {sim.state.t:.6g}  steps = {sim.state.steps}")
            return 0 if sim.stop_reason in ("t_end", "lambda_stop", "resolution") else 1
        if args.command == "verify":
            checks = verify(cfg)
            print(format_checks(checks))
            return 0 if all(c["passed"] for c in checks) else 1
        rows = sweep(cfg, args.out, args.threads)
        for row in rows:
            print(f"point {row['point']}: {row['stop_reason']}  T* = {row['t_star']:.6g}")
        return 0
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
