"""Prometheus metrics for solver activity."""

import threading

from prometheus_client import (
    REGISTRY,
    Counter,
    Gauge,
    start_http_server,
    write_to_textfile,
)

from .logging_config import get_logger

logger = get_logger(__name__)

CRITICAL_VALUE_SOLVES_TOTAL = Counter(
    "ekman_critical_value_solves_total",
    "Critical value root solves",
    ["formulation"],  # continued_fraction, gamma_recursion
)

NEWTON_SOLVES_TOTAL = Counter(
    "ekman_newton_solves_total",
    "Newton solves of the steady equation",
    ["outcome"],  # converged, nonconverged, singular
)

NEWTON_ITERATIONS_TOTAL = Counter(
    "ekman_newton_iterations_total", "Newton iterations across all solves"
)

BRANCH_POINTS_TOTAL = Counter(
    "ekman_branch_points_total", "Accepted continuation points", ["branch"]
)

CONTINUATION_ACTIVE = Gauge(
    "ekman_continuation_active", "Continuation currently running", ["branch"]
)

VERIFICATION_GATE_TOTAL = Counter(
    "ekman_verification_gate_total",
    "Lagrangian verification gate outcomes",
    ["status"],  # pass, fail
)

PROBE_TRIALS_TOTAL = Counter(
    "ekman_probe_trials_total",
    "Uniqueness probe trials",
    ["outcome"],  # basic, nontrivial, diverged
)

LABELLED_METRICS = (
    CRITICAL_VALUE_SOLVES_TOTAL,
    NEWTON_SOLVES_TOTAL,
    BRANCH_POINTS_TOTAL,
    CONTINUATION_ACTIVE,
    VERIFICATION_GATE_TOTAL,
    PROBE_TRIALS_TOTAL,
)


def start_metrics_server(port: int = 8000):
    """Expose the default registry over HTTP from a daemon thread."""

    def _run():
        start_http_server(port)
        logger.info("Prometheus exporter running", extra={"port": port})

    thread = threading.Thread(target=_run, daemon=True)
    thread.start()
    return thread


def write_metrics_textfile(path: str) -> None:
    """Write the registry in text exposition format (node-exporter style)."""
    write_to_textfile(path, REGISTRY)
    logger.debug("Metrics written", extra={"path": path})
