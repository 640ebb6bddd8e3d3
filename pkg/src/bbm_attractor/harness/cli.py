"""Command-line entry point: ``bbm-attractor <experiment> --config PATH``."""
from __future__ import annotations

import argparse
import logging
import sys

from ..errors import BBMError, ConfigError
from .config import EXPERIMENTS, load
from .experiments import run

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bbm-attractor", description=__doc__)
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    overrides = {"experiment": args.experiment, "seed": args.seed, "replicates": args.replicates, "out": args.out}
    try:
        cfg = load(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report, passed = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BBMError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    failed = [v["name"] for v in report["verdicts"] if not v["passed"]]
    print(f"{cfg['experiment']}: {'report-only' if report['report_only'] else ('pass' if passed else 'FAIL')}"
          f" -> {cfg['out']}/report.json")
    if not report["report_only"]:
        for name in failed:
            print(f"  failed: {name}")
    return EXIT_PASS if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
