"""Command line entry point: ``asmr-fl run ...`` (or ``python -m asmr_fl run ...``)."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ATTACKS, DEFAULT_SEEDS, REGIMES, ConfigError, ExperimentConfig, load_config
from .fedsim import DEFENSES, RoundFailedError

EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_CONFIG_UNREADABLE = 3
EXIT_OUTPUT_UNWRITABLE = 4

logger = logging.getLogger("asmr_fl")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asmr-fl", description="Robust federated aggregation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a multi-seed experiment and write rounds.csv / summary.json")
    run.add_argument("--config", type=Path, help="INI file with an [experiment] section")
    run.add_argument("--defense", choices=DEFENSES)
    run.add_argument("--attack", choices=ATTACKS)
    run.add_argument("--regime", choices=REGIMES)
    run.add_argument("--rounds", type=int, help="training rounds (default 12)")
    run.add_argument("--seeds", type=int, help="number of seeds (default 10 fixed / 5 dynamic)")
    run.add_argument("--clients", type=int, help="number of clients (default 10)")
    run.add_argument("--f", type=int, help="assumed malicious count for mkrum/dnc (default 3)")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--calibrate", action="store_true",
                     help="calibrate attack strengths on the attack-free task before running")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    if args.config is not None:
        config = load_config(args.config)
        explicit_seeds = True
    else:
        config = ExperimentConfig()
        explicit_seeds = False
    overrides = {
        "defense": args.defense, "attack": args.attack, "regime": args.regime,
        "rounds": args.rounds, "n_clients": args.clients, "f": args.f,
        "out": str(args.out) if args.out is not None else None,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigError("--seeds must be at least 1")
        overrides["seeds"] = tuple(range(args.seeds))
    elif not explicit_seeds:
        overrides["seeds"] = tuple(range(DEFAULT_SEEDS[args.regime or config.regime]))
    return config.replace(**overrides)


def _check_writable(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise PermissionError(f"output directory {out} is not writable: {exc}") from exc


def run_cli(argv=None) -> int:
    from .calibration import calibrate_all
    from .harness import format_summary, run_sweep, write_results

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.config is not None and not args.config.is_file():
        print(f"error: cannot read config file {args.config}", file=sys.stderr)
        return EXIT_CONFIG_UNREADABLE
    try:
        config = _resolve_config(args)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TypeError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(config.out) if config.out else None
    if out is not None:
        try:
            _check_writable(out)
        except PermissionError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_OUTPUT_UNWRITABLE

    calibration = None
    try:
        if args.calibrate:
            calibration = calibrate_all(config)
            config = config.replace(
                ana_sigma=calibration["ana"]["ana_sigma"],
                sfa_constant=calibration["sfa"]["sfa_constant"],
                corruption_fraction=calibration["unreliable"]["corruption_fraction"],
            )
        per_seed, summary = run_sweep(config)
    except (RoundFailedError, RuntimeError, ValueError) as exc:
        print(f"error: experiment failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if calibration is not None:
        summary["calibration"] = calibration

    print(f"defense={config.defense} attack={config.attack} regime={config.regime} "
          f"seeds={len(config.seeds)} rounds={config.rounds}")
    print(format_summary(summary))
    if out is not None:
        try:
            csv_path, json_path = write_results(out, per_seed, summary, config)
        except OSError as exc:
            print(f"error: cannot write results to {out}: {exc}", file=sys.stderr)
            return EXIT_OUTPUT_UNWRITABLE
        print(f"wrote {csv_path} and {json_path}")
    else:
        logger.debug(json.dumps(summary, default=str))
    return 0


def main() -> None:
    sys.exit(run_cli())
