"""``collision-norm`` command line entry point."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import EXPERIMENTS, load_config
from .errors import CollisionNormError, ConfigError, InvalidParams, SolverFailure
from .experiments import run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2

log = logging.getLogger("collision_norm")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="collision-norm",
        description="Sobolev-norm collision force bounds for linear robot models; writes CSV.",
    )
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", metavar="FILE", help="key = value configuration file")
    ap.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                    help="override one configuration key (repeatable, wins over --config)")
    ap.add_argument("--out", metavar="FILE.csv", help="output file (default: stdout)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.experiment, args.config, args.overrides)
        table = run(cfg)
    except (ConfigError, InvalidParams) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except SolverFailure as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except CollisionNormError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_SOLVER
    if table.summary:
        print(table.summary, file=sys.stderr)
    text = table.to_csv()
    if args.out:
        Path(args.out).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
