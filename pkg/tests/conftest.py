"""Shared fixtures and configuration for all tests."""

import logging

import pytest

from src.analysis.critical_value import solve_kappa_a
from src.analysis.linear_operator import build_eigenfunction
from src.analysis.spectral_domain import SpectralField
from src.analysis.steady_solver import SteadyResidualConfig
from src.config import Config
from src.metrics import LABELLED_METRICS, NEWTON_ITERATIONS_TOTAL

A = 0.8


@pytest.fixture(autouse=True)
def reset_metrics():
    """Reset Prometheus metrics before each test."""
    for metric in LABELLED_METRICS:
        metric._metrics.clear()
    NEWTON_ITERATIONS_TOTAL._value.set(0)
    yield


@pytest.fixture
def caplog_setup(caplog):
    """Configure logging capture for tests."""
    caplog.set_level(logging.INFO)
    return caplog


@pytest.fixture(autouse=True)
def setup_logging():
    """Setup basic logging for all tests."""
    logging.basicConfig(
        level=logging.DEBUG, format="%(levelname)s - %(message)s", force=True
    )
    yield
    logging.getLogger().handlers.clear()


@pytest.fixture(scope="session")
def critical_08():
    """CriticalValueResult at a = 0.8, solved once per session."""
    return solve_kappa_a(A)


@pytest.fixture(scope="session")
def kappa_a(critical_08):
    return critical_08.kappa_a


@pytest.fixture(scope="session")
def eigenfunction_08(kappa_a):
    """Critical eigenfunction at a = 0.8 with N = 32."""
    return build_eigenfunction(A, kappa_a, c=1.0, N=32)


@pytest.fixture(scope="session")
def solver_cfg():
    """Default desk-scale truncation M = 8, N = 32."""
    return SteadyResidualConfig(a=A, M=8, N=32)


@pytest.fixture(scope="session")
def small_cfg():
    """Coarse truncation for tests that run many Newton solves."""
    return SteadyResidualConfig(a=A, M=3, N=12)


@pytest.fixture(scope="session")
def default_config():
    return Config({"problem": {"a": A}})


@pytest.fixture(scope="session")
def branch_cfg(default_config):
    """Truncation the branch command traces at (M = 8, N = 64)."""
    return default_config.residual_config(A, N=default_config.problem.branch_N)


@pytest.fixture(scope="session")
def bifurcation_study(default_config):
    """Trivial branch, bifurcation point and both switched branches at a = 0.8."""
    from src.commands.branch import trace_bifurcation

    return trace_bifurcation(A, default_config)


@pytest.fixture
def basic_field():
    """psi* = cos x2 at the default truncation."""
    return SpectralField.basic(A, 8, 32)
