#!/usr/bin/env python3
import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import pandas as pd

from .core.config import settings
from .core.errors import ConfigError, QuditMemoryError
from .core.logging import setup_logging
from .models.experiment import ExperimentConfig, load_experiment_config
from .models.records import frame_to_records, records_to_frame
from .services.artifact_writer import ArtifactWriter, read_dataset
from .services.experiment_analysis import (
    RELAXATION_CURVES,
    ExperimentAnalysisService,
    fidelity_rows,
    relaxation_frame,
)
from .services.experiment_service import ExperimentSimulator

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DOMAIN = 3

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    path = args.config
    if path is None and Path(settings.DEFAULT_CONFIG_PATH).is_file():
        path = settings.DEFAULT_CONFIG_PATH
    config = load_experiment_config(path)

    update: Dict[str, object] = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.shots is not None:
        update["shots"] = args.shots
    if args.ideal_pulses:
        update["ideal_pulses"] = True
    if args.no_refocus:
        update["refocus"] = False
    if update:
        # revalidate so overrides obey the same schema as the file
        config = _validated_config({**config.model_dump(by_alias=True), **update})
    return config


def _validated_config(raw: Dict[str, object]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValueError as e:
        raise ConfigError(f"Invalid command-line override: {e}", location="argv")


def _writer(args: argparse.Namespace, config: ExperimentConfig) -> ArtifactWriter:
    return ArtifactWriter(args.out or settings.OUTPUT_DIR, args.command, config, config.seed)


def cmd_frequencies(args: argparse.Namespace, config: ExperimentConfig) -> None:
    simulator = ExperimentSimulator(config, jobs=args.jobs)
    frame = pd.DataFrame(simulator.frequency_table())
    for _, row in frame[frame["degenerate"]].iterrows():
        logger.warning(f"Degenerate {row['kind']} line {row['bra']} <-> {row['ket']} at {row['frequency_MHz']:.6f} MHz")

    named = frame[frame["name"] != ""]
    for _, row in named.iterrows():
        print(f"{row['name']:>3}  {row['bra']} <-> {row['ket']}  {row['frequency_MHz']:.4f} MHz")

    writer = _writer(args, config)
    writer.write_csv("frequencies.csv", frame)
    writer.write_manifest()


def cmd_sweep_theta(args: argparse.Namespace, config: ExperimentConfig) -> None:
    records = ExperimentSimulator(config, jobs=args.jobs).sweep_theta()
    writer = _writer(args, config)
    writer.write_csv("theta_echoes.csv", records_to_frame(records))

    combined, fit = ExperimentAnalysisService(config.fit).analyze_theta(records, seed=config.seed)
    writer.write_csv("theta_combinations.csv", combined)
    writer.write_json("theta_fit.json", {"fit": fit.to_payload(), "message": fit.message})
    writer.write_manifest()


def cmd_sweep_storage(args: argparse.Namespace, config: ExperimentConfig) -> None:
    records = ExperimentSimulator(config, jobs=args.jobs).sweep_storage()
    analysis = ExperimentAnalysisService(config.fit).analyze_storage(records, config.relaxation.T2n_ms)

    writer = _writer(args, config)
    writer.write_csv("storage_echoes.csv", records_to_frame(records))
    writer.write_csv("storage_combinations.csv", analysis.frame)
    writer.write_json(
        "storage_fit.json",
        {
            "T2n_ms": config.relaxation.T2n_ms,
            "uncorrupted_scale": analysis.uncorrupted_scale.to_payload(),
            "corrupted_scale": analysis.corrupted_scale.to_payload(),
        },
    )
    writer.write_manifest()


def cmd_fidelity(args: argparse.Namespace, config: ExperimentConfig) -> None:
    data = ExperimentSimulator(config, jobs=args.jobs).fidelity_data()
    report = ExperimentAnalysisService(config.fit).fidelity_report(data)
    print(f"MW pi pulse fidelity: {100 * report.mw.fidelity:.2f} %")
    if report.rf:
        print(f"RF pi pulse fidelity: {100 * report.rf_combined.fidelity:.2f} %")

    writer = _writer(args, config)
    writer.write_csv("fidelity.csv", pd.DataFrame(fidelity_rows(report)))
    writer.write_json("fidelity.json", report.to_payload())
    writer.write_manifest()


def cmd_relaxation(args: argparse.Namespace, config: ExperimentConfig) -> None:
    data = ExperimentSimulator(config, jobs=args.jobs).relaxation_data()
    fits = ExperimentAnalysisService(config.fit).relaxation_report(data, seed=config.seed)
    for name, fit in fits.items():
        unit = RELAXATION_CURVES[name][0]
        if fit.converged:
            print(f"{name}: {fit.params['T']:.4g} {unit}")
        else:
            print(f"{name}: fit did not converge ({fit.message})")

    writer = _writer(args, config)
    writer.write_csv("relaxation.csv", relaxation_frame(data))
    writer.write_json(
        "relaxation_fit.json",
        {
            "configured": config.relaxation.model_dump(include={"T1e_ms", "T2e_us", "T2n_ms"}),
            "fits": {name: {"unit": RELAXATION_CURVES[name][0], **fit.to_payload(), "message": fit.message}
                     for name, fit in fits.items()},
        },
    )
    writer.write_manifest()


def cmd_fit(args: argparse.Namespace, config: ExperimentConfig) -> None:
    try:
        frame = read_dataset(args.input)
        records = frame_to_records(frame)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read echo data from {args.input}: {e}", location=str(args.input))

    combined, fit = ExperimentAnalysisService(config.fit).analyze_theta(records, seed=config.seed)
    writer = _writer(args, config)
    writer.write_csv("fit_combinations.csv", combined)
    writer.write_json("fit.json", {"input": Path(args.input).name, "fit": fit.to_payload(), "message": fit.message})
    writer.write_manifest()


COMMANDS: Dict[str, Callable[[argparse.Namespace, ExperimentConfig], None]] = {
    "frequencies": cmd_frequencies,
    "sweep-theta": cmd_sweep_theta,
    "sweep-storage": cmd_sweep_storage,
    "fidelity": cmd_fidelity,
    "relaxation": cmd_relaxation,
    "fit": cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None,
                        help=f"Experiment config JSON (default: {settings.DEFAULT_CONFIG_PATH} if present)")
    common.add_argument("--out", type=str, default=None,
                        help=f"Output directory (default: {settings.OUTPUT_DIR})")
    common.add_argument("--seed", type=int, default=None, help="Override the config seed")
    common.add_argument("--shots", type=int, default=None, help="Ensemble size for imperfect pulses")
    common.add_argument("--ideal-pulses", action="store_true", help="Disable B1 inhomogeneity")
    common.add_argument("--no-refocus", action="store_true", help="Drop refocusing pulses 5-12")
    common.add_argument("--jobs", type=int, default=None, help="Worker processes (default: available CPUs)")
    common.add_argument("--log-level", type=str.upper, default=None, choices=LOG_LEVELS, help="Logging level")

    parser = argparse.ArgumentParser(prog=settings.PROJECT_NAME, description="Spin qudit logical memory simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("frequencies", parents=[common], help="ESR and NMR transition table")
    sub.add_parser("sweep-theta", parents=[common], help="Echoes against the Z(theta) error angle")
    sub.add_parser("sweep-storage", parents=[common], help="Echo combinations against storage time")
    sub.add_parser("fidelity", parents=[common], help="Pulse fidelities from nutation and DD simulations")
    sub.add_parser("relaxation", parents=[common], help="T1e, T2e and T2n from simulated relaxation curves")
    fit = sub.add_parser("fit", parents=[common], help="Fit A_n to an existing echo CSV")
    fit.add_argument("--input", type=str, required=True, help="CSV with the echo columns")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        config = _load_config(args)
        COMMANDS[args.command](args, config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e.detail}")
        print(f"error: {e.detail}", file=sys.stderr)
        return EXIT_CONFIG
    except QuditMemoryError as e:
        logger.error(f"{e.error_code}: {e.detail}")
        print(f"error: {e.detail}", file=sys.stderr)
        return EXIT_DOMAIN
    except Exception as e:
        logger.exception(f"Unexpected failure in {args.command}: {e}")
        return EXIT_UNEXPECTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
