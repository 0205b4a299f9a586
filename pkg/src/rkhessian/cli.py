"""``rkhessian`` command line: run one benchmark experiment per invocation.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 convergence failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .experiments import (
    EXPERIMENTS,
    ConfigError,
    ConvergenceFailure,
    ExperimentConfig,
    default_config,
    run_experiment,
)
from .odecore import NewtonConvergenceError, NonFiniteError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CONVERGENCE = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rkhessian", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", type=Path, help="JSON experiment config")
        sp.add_argument("--out", type=Path, help="CSV output path (default: stdout only summary)")
        sp.add_argument("--mode", choices=("exact", "naive", "both"))
        sp.add_argument("--h", type=float, help="step size")
        sp.add_argument("--steps", type=int, help="number of steps")
        sp.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    return parser


def resolve_config(args) -> ExperimentConfig:
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = ExperimentConfig.from_json(text)
        if cfg.experiment != args.experiment:
            raise ConfigError(
                f"config is for {cfg.experiment!r} but subcommand is {args.experiment!r}"
            )
    else:
        cfg = default_config(args.experiment)
    for key in ("mode", "h", "steps"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    if args.out is not None:
        cfg.out = str(args.out)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dump_config:
        print(cfg.to_json())
        return EXIT_OK
    try:
        report = run_experiment(cfg)
    except ConvergenceFailure as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (NonFiniteError, NewtonConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.out:
        Path(cfg.out).write_text(report.to_csv())
    for line in report.summary:
        print(line)
    if report.data.get("failed"):
        print(f"optimisation did not converge for: {report.data['failed']}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
