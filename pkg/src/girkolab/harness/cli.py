"""Command line entry point ``girkolab``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ConfigurationError, GirkolabError
from .config import load_config
from .report import report
from .runner import EXIT_ACCURACY, EXIT_CONFIG, EXIT_OK, run

log = logging.getLogger("girkolab")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="girkolab", description="Random non-Hermitian matrix experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True, help="path to a JSON config")
    r.add_argument("--workers", type=int, default=None, help="worker processes (overrides GIRKOLAB_WORKERS)")
    r.add_argument("--out", default=None, help="output directory")

    rep = sub.add_parser("report", help="tables, fits and plots from a result directory")
    rep.add_argument("--in", dest="in_dir", required=True)
    rep.add_argument("--out", default=None, help="report directory (default: <in>/report)")

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(json.dumps({"kind": cfg.kind, "experiment_id": cfg.experiment_id}))
            return EXIT_OK
        if args.command == "run":
            if args.workers is not None and args.workers < 1:
                raise ConfigurationError("--workers must be at least 1")
            cfg = load_config(args.config)
            summary = run(cfg, workers=args.workers, out_dir=args.out)
            print(f"{summary.records} records -> {summary.out_dir} "
                  f"({summary.wall_time:.1f} s, {summary.accuracy_failures} accuracy failures)")
            return summary.exit_code
        if args.command == "report":
            summary = report(args.in_dir, args.out)
            print(f"{summary.experiments} experiments, {len(summary.files)} files -> {summary.out_dir}")
            return EXIT_OK
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GirkolabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
