"""
Command-line front end.

    python -m src.cli critical-value --a 0.8
    python -m src.cli branch --a 0.8 --out branch.csv --svg diagram.svg
    python -m src.cli verify --field psi.json --kappa 1.0
    python -m src.cli probe --a 0.8 --kappa 1.25 --trials 50

Exit codes: 0 success, 2 parameter error, 3 numerical failure,
4 verification gate failure.
"""

import argparse
import importlib
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import yaml

from .artifacts import RunConfig, write_manifest
from .config import Config, load_config, validate_config
from .errors import describe, exit_code_for
from .logging_config import (
    clear_run_id,
    get_logger,
    log_solver_event,
    set_run_id,
    setup_logging,
)
from .metrics import start_metrics_server, write_metrics_textfile

logger = get_logger(__name__)

COMMANDS = {
    "critical-value": ".commands.critical_value",
    "eigenfunction": ".commands.eigenfunction",
    "branch": ".commands.branch",
    "verify": ".commands.verify",
    "probe": ".commands.probe",
    "sweep": ".commands.sweep",
}

# keys of the parsed namespace that do not change results
_NON_RESULT_ARGS = {"command", "config", "log_level", "output_dir"}
_OUTPUT_ARGS = ("out", "dump_fields", "svg", "field_out", "dump_dir")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    common.add_argument("--out", help="write the primary result here instead of stdout")
    common.add_argument("--seed", type=int, help="seed for randomized probes")
    common.add_argument("--tol", type=float, help="tolerance for the command's main check")
    common.add_argument("--config", help="path to config.yaml")
    common.add_argument("--output-dir", help="directory for manifests (default from config)")
    common.add_argument(
        "--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="ekman-bifurcation",
        description="Critical Ekman number, eigenfunction and bifurcating steady states",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("critical-value", parents=[common], help="solve for kappa_a")
    p.add_argument("--a", type=float)
    p.add_argument("--sweep", help="a0:a1:steps, emits the kappa_a(a) curve as CSV")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("eigenfunction", parents=[common], help="critical eigenfunction table")
    p.add_argument("--a", type=float)
    p.add_argument("--N", type=int, default=32)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--field-out", help="also write the eigenfunction as field JSON")

    p = sub.add_parser("branch", parents=[common], help="continue the bifurcating branch")
    p.add_argument("--a", type=float)
    p.add_argument("--kappa-min", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--dump-fields", help="directory for one field JSON per branch point")
    p.add_argument("--svg", help="write the bifurcation diagram as SVG")
    p.add_argument(
        "--verify", action="store_true", help="gate every point through the Lagrangian check"
    )

    p = sub.add_parser("verify", parents=[common], help="cross-check a steady state")
    p.add_argument("--field", required=True, help="SpectralField JSON")
    p.add_argument("--kappa", type=float, required=True)

    p = sub.add_parser("probe", parents=[common], help="uniqueness probe for kappa*a >= 1")
    p.add_argument("--a", type=float)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--dump-dir", help="directory for counterexample fields")

    p = sub.add_parser("sweep", parents=[common], help="kappa_a over a range of a")
    p.add_argument("--range", dest="range", required=True, help="a0:a1:steps")
    p.add_argument("--workers", type=int)

    return parser


def _load(args: argparse.Namespace) -> Config:
    if args.config:
        return load_config(args.config)
    if Path("config.yaml").exists():
        return load_config("config.yaml")
    return load_config(None)


def build_run_config(args: argparse.Namespace, config: Config) -> RunConfig:
    """RunConfig for a parsed command line; every result-affecting flag is hashed."""
    parameters = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in _NON_RESULT_ARGS and key not in _OUTPUT_ARGS and value is not None
    }
    a = getattr(args, "a", None)
    tolerances = {
        "critical_value": config.critical_value.tol,
        "newton": config.solver.newton_tol,
        "gate": config.lagrangian.gate_tol,
    }
    if args.tol is not None:
        tolerances["command"] = args.tol
    return RunConfig(
        command=args.command,
        a=a if a is not None else config.problem.a,
        M=config.problem.M,
        N=config.problem.branch_N if args.command == "branch" else config.problem.N,
        tolerances=tolerances,
        outputs={key: getattr(args, key) for key in _OUTPUT_ARGS if hasattr(args, key)},
        format="json" if args.json else "csv",
        seed=args.seed if args.seed is not None else config.run.seed,
        parameters=parameters,
    )


def run_command(args: argparse.Namespace, config: Config) -> int:
    """Dispatch to ``run_<name>`` in the command's module and map errors to exit codes."""
    run = build_run_config(args, config)
    set_run_id(run.run_id)
    started = time.monotonic()
    artifacts: List[str] = []
    exit_code = 0

    metrics_config = config.get_metrics_config()
    if metrics_config.get("enabled", False):
        try:
            start_metrics_server(int(metrics_config.get("port", 8000)))
        except Exception as e:
            logger.error(
                "Failed to start metrics server", exc_info=True, extra={"error": str(e)}
            )

    log_solver_event(logger, "cli", "start", "running", command=args.command)
    try:
        module = importlib.import_module(COMMANDS[args.command], package=__package__)
        run_func = getattr(module, f"run_{args.command.replace('-', '_')}")
        artifacts = list(run_func(args, config, run) or [])
        log_solver_event(logger, "cli", "complete", "success", command=args.command)
    except Exception as e:
        exit_code = exit_code_for(e)
        level = logging.ERROR if exit_code in (2, 3, 4) else logging.CRITICAL
        logger.log(
            level,
            "Command failed",
            exc_info=exit_code not in (2, 4),
            extra={
                "command": args.command,
                "exit_code": exit_code,
                "error": str(e),
                "error_type": type(e).__name__,
            },
        )
        print(describe(e), file=sys.stderr)
    finally:
        output_dir = args.output_dir or config.run.output_dir
        try:
            write_manifest(output_dir, run, started, exit_code, artifacts)
        except OSError as e:
            logger.warning(
                "Failed to write manifest", extra={"error": str(e), "output_dir": output_dir}
            )
        textfile = metrics_config.get("textfile")
        if textfile:
            write_metrics_textfile(textfile)
        clear_run_id()
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = _load(args)
    except (FileNotFoundError, ValueError, yaml.YAMLError) as e:
        # Can't use logger yet, fall back to print
        print(f"CRITICAL: Failed to load configuration: {e}", file=sys.stderr)
        return 2

    logging_config: Dict = dict(config.get_logging_config())
    if args.log_level:
        logging_config["level"] = args.log_level
    setup_logging(logging_config)

    for warning in validate_config(config):
        logger.warning("Configuration warning", extra={"warning": warning})

    return run_command(args, config)


if __name__ == "__main__":
    sys.exit(main())
