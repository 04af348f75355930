"""
Configuration loading and validation for ekman-bifurcation.

Loads configuration from config.yaml and provides typed access to settings.
Numerical modules never read YAML: ``Config`` converts its sections into
the solver dataclasses they take.
"""

import math
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from .analysis.spectral_domain import THEOREM_A_MIN
from .analysis.steady_solver import ContinuationConfig, SteadyResidualConfig

VALID_LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
TRAJECTORY_SIGNS = ["as_written", "reversed"]


class ProblemConfig:
    """Channel aspect ratio and spectral truncation."""

    def __init__(self, config: dict):
        self.a = float(config.get("a", 0.8))
        self.M = int(config.get("M", 8))
        self.N = int(config.get("N", 32))
        # truncation for branch tracing; the Lagrangian gate needs the m = 1 tail resolved
        self.branch_N = int(config.get("branch_N", 64))


class CriticalValueSettings:
    def __init__(self, config: dict):
        self.tol = float(config.get("tol", 1e-10))
        self.max_depth = int(config.get("max_depth", 65536))
        self.oracle_tol = float(config.get("oracle_tol", 1e-8))


class SolverSettings:
    """Newton iteration on the steady residual."""

    def __init__(self, config: dict):
        self.newton_tol = float(config.get("newton_tol", 1e-10))
        self.max_iter = int(config.get("max_iter", 30))
        self.fd_step = float(config.get("fd_step", 1e-7))
        self.min_damping = float(config.get("min_damping", 1.0 / 64.0))


class ContinuationSettings:
    def __init__(self, config: dict):
        self.ds = float(config.get("ds", 0.005))
        self.ds_min = float(config.get("ds_min", 1e-6))
        self.ds_max = float(config.get("ds_max", 0.008))
        self.max_steps = int(config.get("max_steps", 12))
        # trivial branch starts at this multiple of kappa_a
        self.trivial_start_factor = float(config.get("trivial_start_factor", 1.2))
        self.trivial_ds = float(config.get("trivial_ds", 0.008))


class LagrangianSettings:
    """Trajectory integration and the verification gate."""

    def __init__(self, config: dict):
        self.dt = float(config.get("dt", 0.02))
        self.flow_dt = float(config.get("flow_dt", 1e-3))
        self.flow_t_end = float(config.get("flow_t_end", 10.0))
        self.gate_tol = float(config.get("gate_tol", 1e-5))
        self.quadrature_tol = float(config.get("quadrature_tol", 1e-8))
        self.quadrature_order = int(config.get("quadrature_order", 8))
        self.max_panel = float(config.get("max_panel", 1.0))
        self.sample_grid = int(config.get("sample_grid", 8))
        self.trajectory_sign = str(config.get("trajectory_sign", "as_written"))


class ProbeSettings:
    def __init__(self, config: dict):
        self.trials = int(config.get("trials", 50))
        radius = config.get("radius_fraction", [0.1, 0.8])
        self.radius_fraction: Tuple[float, float] = (float(radius[0]), float(radius[1]))
        self.decay = float(config.get("decay", 0.5))


class RunSettings:
    def __init__(self, config: dict):
        self.seed = int(config.get("seed", 0))
        self.output_dir = str(config.get("output_dir", "./runs"))
        self.workers = int(config.get("workers", 1))


class Config:
    """
    Main configuration object.

    Provides typed access to configuration values and preserves
    the raw config for modules that need it (like logging).
    """

    def __init__(self, config_dict: dict):
        self.raw_config = config_dict

        self.problem = ProblemConfig(config_dict.get("problem", {}))
        self.critical_value = CriticalValueSettings(config_dict.get("critical_value", {}))
        self.solver = SolverSettings(config_dict.get("solver", {}))
        self.continuation = ContinuationSettings(config_dict.get("continuation", {}))
        self.lagrangian = LagrangianSettings(config_dict.get("lagrangian", {}))
        self.probe = ProbeSettings(config_dict.get("probe", {}))
        self.run = RunSettings(config_dict.get("run", {}))

    def get_logging_config(self) -> Dict[str, Any]:
        logging_config = self.raw_config.get("logging", {})
        return logging_config if isinstance(logging_config, dict) else {}

    def get_metrics_config(self) -> Dict[str, Any]:
        metrics_config = self.raw_config.get("metrics", {})
        return metrics_config if isinstance(metrics_config, dict) else {}

    def residual_config(
        self, a: Optional[float] = None, N: Optional[int] = None
    ) -> SteadyResidualConfig:
        return SteadyResidualConfig(
            a=self.problem.a if a is None else float(a),
            M=self.problem.M,
            N=self.problem.N if N is None else int(N),
            newton_tol=self.solver.newton_tol,
            max_iter=self.solver.max_iter,
            fd_step=self.solver.fd_step,
            min_damping=self.solver.min_damping,
        )

    def continuation_config(self, **overrides: Any) -> ContinuationConfig:
        settings = dict(
            ds=self.continuation.ds,
            ds_min=self.continuation.ds_min,
            ds_max=self.continuation.ds_max,
            max_steps=self.continuation.max_steps,
        )
        settings.update(overrides)
        return ContinuationConfig(**settings)


def default_config() -> Config:
    return Config({"problem": {}})


def load_config(config_path: Optional[str] = "config.yaml") -> Config:
    """
    Load configuration from YAML file.

    Args:
        config_path: Path to config.yaml; None returns the built-in defaults

    Returns:
        Config object with parsed configuration

    Raises:
        FileNotFoundError: If config file doesn't exist
        yaml.YAMLError: If config file is invalid YAML
        ValueError: If required configuration is missing
    """
    if config_path is None:
        return default_config()

    config_file = Path(config_path)

    if not config_file.exists():
        raise FileNotFoundError(
            f"Configuration file not found: {config_path}\n"
            f"Create a config.yaml file or pass --config with the correct path."
        )

    try:
        with open(config_file, "r") as f:
            config_dict = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise yaml.YAMLError(
            f"Invalid YAML in configuration file: {config_path}\n" f"Error: {e}"
        )

    if config_dict is None:
        raise ValueError(f"Configuration file is empty: {config_path}")

    if "problem" not in config_dict:
        raise ValueError("Missing required 'problem' section in config.yaml")

    return Config(config_dict)


def validate_config(config: Config) -> list[str]:
    """
    Validate configuration and return list of warnings.

    Args:
        config: Config object to validate

    Returns:
        List of warning messages (empty if no warnings)
    """
    warnings = []

    a = config.problem.a
    if not 0 < a < 1:
        warnings.append(f"a={a} is outside (0, 1); no bifurcation exists there")
    elif a < THEOREM_A_MIN:
        warnings.append(
            f"a={a} is below 1/sqrt(2) ({THEOREM_A_MIN:.6f}); results are "
            f"computed but not covered by the existence theorem"
        )

    if config.problem.M < 2 or config.problem.N < 16:
        warnings.append(
            f"truncation (M={config.problem.M}, N={config.problem.N}) is coarse; "
            f"use at least M=2, N=16"
        )
    if config.problem.branch_N < config.problem.N:
        warnings.append(
            f"branch_N={config.problem.branch_N} is below N={config.problem.N}; "
            f"branch states would be coarser than the eigenfunction tables"
        )

    tolerances = {
        "critical_value.tol": config.critical_value.tol,
        "critical_value.oracle_tol": config.critical_value.oracle_tol,
        "solver.newton_tol": config.solver.newton_tol,
        "lagrangian.gate_tol": config.lagrangian.gate_tol,
        "lagrangian.quadrature_tol": config.lagrangian.quadrature_tol,
        "lagrangian.dt": config.lagrangian.dt,
        "lagrangian.flow_dt": config.lagrangian.flow_dt,
    }
    for name, value in tolerances.items():
        if not (math.isfinite(value) and value > 0):
            warnings.append(f"{name}={value} must be positive")

    cont = config.continuation
    if not 0 < cont.ds_min <= cont.ds <= cont.ds_max:
        warnings.append(
            f"continuation steps must satisfy 0 < ds_min <= ds <= ds_max, got "
            f"({cont.ds_min}, {cont.ds}, {cont.ds_max})"
        )
    if cont.trivial_start_factor <= 1:
        warnings.append(
            "continuation.trivial_start_factor <= 1 starts the trivial branch "
            "below the critical value"
        )

    if config.lagrangian.trajectory_sign not in TRAJECTORY_SIGNS:
        warnings.append(
            f"Unknown trajectory_sign '{config.lagrangian.trajectory_sign}'. "
            f"Must be one of: {', '.join(TRAJECTORY_SIGNS)}"
        )

    lo, hi = config.probe.radius_fraction
    if not 0 < lo <= hi < 1:
        warnings.append(
            f"probe radius_fraction ({lo}, {hi}) must satisfy 0 < lo <= hi < 1"
        )

    logging_config = config.get_logging_config()
    if logging_config:
        log_level = logging_config.get("level", "INFO").upper()
        if log_level not in VALID_LOG_LEVELS:
            warnings.append(
                f"Invalid log level '{log_level}'. "
                f"Must be one of: {', '.join(VALID_LOG_LEVELS)}"
            )

        log_format = logging_config.get("format", "text").lower()
        if log_format not in ["text", "json"]:
            warnings.append(
                f"Invalid log format '{log_format}'. Must be 'text' or 'json'"
            )

    return warnings
