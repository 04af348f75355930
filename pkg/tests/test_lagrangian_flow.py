import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.analysis.lagrangian_flow import (
    TpsiQuadrature,
    apply_T,
    check_growth_bounds,
    condition_check,
    flow_gradient,
    horizon_for,
    integrate_trajectory,
    lagrangian_residual,
    operator_identity_error,
    sample_points,
    trajectory_sign,
    verification_gate,
)
from src.analysis.spectral_domain import PointEvaluator, SpectralField
from src.commands.verify import lagrangian_check
from src.errors import HorizonError, ParameterError, VerificationGateError
from src.metrics import VERIFICATION_GATE_TOTAL

A = 0.8
POINTS = np.array([[0.3, 0.4], [2.0, 1.5], [5.5, 3.0], [7.0, 5.9]])


def near_basic(eps=0.1, M=2, N=4):
    """psi* plus one oblique mode."""
    return SpectralField.from_modes(A, M, N, {(0, 1): 1.0, (1, 1): eps})


def random_near_basic(seed, eps=0.02, M=2, N=4):
    rng = np.random.default_rng(seed)
    decay = 0.5 ** (np.arange(M + 1)[:, None] + np.abs(np.arange(-N, N + 1))[None, :])
    coeffs = eps * rng.standard_normal((M + 1, 2 * N + 1)) * decay
    return SpectralField.basic(A, M, N) + SpectralField(A, coeffs).enforce_zero_mean()


class TestTrajectorySign:
    """Test the configurable drift sign."""

    def test_names(self):
        """Test that as_written is -1 and reversed is +1."""
        assert trajectory_sign("as_written") == -1.0
        assert trajectory_sign("reversed") == 1.0
        assert trajectory_sign(1) == 1.0

    @pytest.mark.parametrize("value", ["backwards", 0.5])
    def test_invalid(self, value):
        """Test that unknown signs are parameter errors."""
        with pytest.raises(ParameterError):
            trajectory_sign(value)


class TestIntegrateTrajectory:
    """Test RK4 trajectories."""

    def test_basic_flow_closed_form(self):
        """Test y = (x1 - t sin x2, x2) for psi*."""
        series = integrate_trajectory(SpectralField.basic(A, 2, 4), POINTS, 3.0, 0.05)
        for k, t in enumerate(series.t):
            expected = POINTS.copy()
            expected[:, 0] -= t * np.sin(POINTS[:, 1])
            assert_allclose(series.y[k], expected, atol=1e-12)

    def test_reversed_sign(self):
        """Test that the reversed sign moves along +u."""
        series = integrate_trajectory(
            SpectralField.basic(A, 2, 4), POINTS, 1.0, 0.05, n_output=1, sign=1.0
        )
        assert_allclose(series.y[-1, :, 0], POINTS[:, 0] + np.sin(POINTS[:, 1]), atol=1e-12)

    def test_zero_field_is_stationary(self):
        """Test y = x when u = 0."""
        series = integrate_trajectory(SpectralField.zeros(A, 2, 4), POINTS, 5.0, 0.1)
        for k in range(series.t.size):
            assert_allclose(series.y[k], POINTS, atol=0.0)

    def test_level_set_conserved(self):
        """Test that psi stays constant along a trajectory up to t = 10."""
        f = near_basic()
        series = integrate_trajectory(f, POINTS, 10.0, 1e-3)
        ev = PointEvaluator(f)
        start = ev.values(POINTS)
        period = np.array([2 * np.pi / A, 2 * np.pi])
        for k in range(series.t.size):
            values = ev.values(np.mod(series.y[k], period))
            assert np.max(np.abs(values - start)) < 1e-8

    def test_fourth_order_convergence(self):
        """Test the error ratio under dt halving against a dt/8 reference."""
        f = near_basic(0.2, 1, 2)
        dt = 0.1

        def endpoint(step):
            return integrate_trajectory(f, POINTS, 2.0, step, n_output=1).y[-1]

        reference = endpoint(dt / 8)
        coarse = np.max(np.abs(endpoint(dt) - reference))
        fine = np.max(np.abs(endpoint(dt / 2) - reference))
        assert 13.0 <= coarse / fine <= 19.0

    def test_periodic_equivariance(self):
        """Test that shifting x by a period shifts y by the same period."""
        f = random_near_basic(0)
        shift = np.array([2 * np.pi / A, 2 * np.pi])
        base = integrate_trajectory(f, POINTS, 4.0, 0.01, n_output=2).y
        for direction in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
            moved = integrate_trajectory(f, POINTS + shift * direction, 4.0, 0.01, n_output=2).y
            assert_allclose(moved - base, np.broadcast_to(shift * direction, base.shape), atol=1e-10)

    @pytest.mark.parametrize("t_end, dt", [(1.0, 0.0), (1.0, -0.1), (-1.0, 0.1)])
    def test_invalid_times(self, t_end, dt):
        """Test that dt <= 0 or t_end < 0 is a parameter error."""
        with pytest.raises(ParameterError):
            integrate_trajectory(SpectralField.basic(A, 2, 4), POINTS, t_end, dt)


class TestFlowGradient:
    """Test the variational equation for the flow map gradient."""

    def test_identity_at_start(self):
        """Test grad y = I at t = 0."""
        series = flow_gradient(near_basic(), POINTS, 1.0, 0.01)
        assert_allclose(series.grad_y[0], np.broadcast_to(np.eye(2), (4, 2, 2)), atol=0.0)

    def test_zero_field(self):
        """Test grad y = I and det = 1 for u = 0."""
        series = flow_gradient(SpectralField.zeros(A, 2, 4), POINTS, 3.0, 0.1)
        assert_allclose(series.grad_y, np.broadcast_to(np.eye(2), series.grad_y.shape), atol=0.0)
        assert series.det_err_max == 0.0

    def test_basic_flow_closed_form(self):
        """Test grad y = [[1, -t cos x2], [0, 1]] for psi*."""
        series = flow_gradient(SpectralField.basic(A, 2, 4), POINTS, 5.0, 0.05)
        for k, t in enumerate(series.t):
            expected = np.zeros((4, 2, 2))
            expected[:, 0, 0] = 1.0
            expected[:, 1, 1] = 1.0
            expected[:, 0, 1] = -t * np.cos(POINTS[:, 1])
            assert_allclose(series.grad_y[k], expected, atol=1e-12)
        assert series.det_err_max < 1e-12

    def test_samples(self):
        """Test that samples iterate over times and points."""
        series = flow_gradient(SpectralField.basic(A, 2, 4), POINTS, 1.0, 0.1, n_output=2)
        samples = list(series.samples())
        assert len(samples) == 3 * 4
        assert samples[0].t == 0.0
        assert samples[0].det_err == 0.0
        assert samples[-1].grad_y.shape == (2, 2)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_determinant_conserved(self, seed):
        """Test |det grad y - 1| < 1e-8 up to t = 10 with dt = 1e-3."""
        series = flow_gradient(random_near_basic(seed), POINTS, 10.0, 1e-3)
        assert series.det_err_max < 1e-8


class TestGrowthBounds:
    """Test the exponential growth bounds on grad y."""

    def test_zero_field_equality_at_start(self):
        """Test |I| = sqrt(2) meets the gradient bound with equality at t = 0."""
        f = SpectralField.zeros(A, 2, 4)
        report = check_growth_bounds(f, flow_gradient(f, POINTS, 2.0, 0.1))
        assert report.violations_gradient == 0
        assert_allclose(report.min_slack_gradient, 0.0, atol=1e-12)
        assert not report.cond13
        assert report.violations_perturbation is None
        assert "skipped" in report.notice
        assert report.ok

    def test_basic_flow(self):
        """Test |grad y| <= sqrt(2) + sqrt(5) t for psi*."""
        f = SpectralField.basic(A, 2, 4)
        report = check_growth_bounds(f, flow_gradient(f, POINTS, 10.0, 0.05))
        assert report.epsilon == 0.0
        assert report.cond13
        assert report.violations_perturbation == 0
        assert report.min_slack_perturbation >= 0.0
        assert report.ok

    def test_random_fields_near_basic(self):
        """Test no violation over 100 (field, x, t) samples."""
        rng = np.random.default_rng(42)
        total = 0
        for seed in range(5):
            f = random_near_basic(seed)
            x = rng.uniform([0, 0], [2 * np.pi / A, 2 * np.pi], size=(4, 2))
            report = check_growth_bounds(f, flow_gradient(f, x, 5.0, 0.01, n_output=5))
            assert report.cond13
            assert report.ok
            total += report.samples
        assert total >= 100

    def test_needs_gradient(self):
        """Test that a position-only series is rejected."""
        f = SpectralField.basic(A, 2, 4)
        with pytest.raises(ParameterError):
            check_growth_bounds(f, integrate_trajectory(f, POINTS, 1.0, 0.1))


class TestQuadrature:
    """Test the exponentially weighted quadrature and T_psi."""

    def test_tail_below_tolerance(self):
        """Test that the horizon keeps the tail at tol/10."""
        quad = TpsiQuadrature.for_tolerance(0.5, 1e-8)
        assert quad.tail_bound() <= 1e-9 * (1 + 1e-12)
        assert quad.s_max == pytest.approx(horizon_for(0.5, 1e-8))

    def test_weights_integrate_exponential(self):
        """Test that the weights sum to 1/kappa up to the tail."""
        quad = TpsiQuadrature.for_tolerance(0.5, 1e-8)
        _, weights = quad.nodes_and_weights()
        assert abs(weights.sum() - 2.0) < 1e-8

    def test_trajectory_step_tied_to_tolerance(self):
        """Test that the RK4 step is capped by tol^(1/4) and the panel width."""
        quad = TpsiQuadrature.for_tolerance(0.2, 1e-8)
        assert quad.trajectory_step(0.02) == pytest.approx(1e-2)
        assert quad.trajectory_step(1e-3) == 1e-3
        coarse = TpsiQuadrature(kappa=0.5, s_max=60.0, n_panels=1200, tol=1e-4)
        assert coarse.trajectory_step(1.0) == pytest.approx(0.05)

    def test_horizon_error(self):
        """Test that a short horizon is rejected with a suggested s_max."""
        quad = TpsiQuadrature(kappa=0.5, s_max=5.0, n_panels=5)
        with pytest.raises(HorizonError) as info:
            apply_T(SpectralField.basic(A, 2, 4), lambda y: np.ones(len(y)), 0.5, quad, POINTS)
        assert info.value.suggested_s_max == pytest.approx(horizon_for(0.5, 1e-8))

    def test_kappa_mismatch(self):
        """Test that the quadrature must match kappa."""
        quad = TpsiQuadrature.for_tolerance(0.5, 1e-8)
        with pytest.raises(ParameterError, match="quadrature built for"):
            apply_T(SpectralField.basic(A, 2, 4), SpectralField.basic(A, 2, 4), 0.6, quad, POINTS)

    def test_basic_forcing_on_basic_flow(self):
        """Test T psi* = cos(x2)/kappa along psi* trajectories."""
        f = SpectralField.basic(A, 2, 4)
        quad = TpsiQuadrature.for_tolerance(0.5, 1e-8)
        values = apply_T(f, f, 0.5, quad, POINTS)
        assert_allclose(values, np.cos(POINTS[:, 1]) / 0.5, atol=1e-7)

    def test_constant_forcing(self):
        """Test T 1 = 1/kappa for any flow."""
        f = near_basic()
        quad = TpsiQuadrature.for_tolerance(0.7, 1e-8)
        values = apply_T(f, lambda y: np.ones(len(y)), 0.7, quad, POINTS)
        assert_allclose(values, 1 / 0.7, atol=1e-8)

    def test_zonal_shear_closed_form(self):
        """Test T cos(a x1) = Re[e^{i a x1}/(kappa + i a sin x2)] for psi*."""
        f = SpectralField.basic(A, 2, 4)
        quad = TpsiQuadrature.for_tolerance(1.0, 1e-10)
        values = apply_T(f, lambda y: np.cos(A * y[:, 0]), 1.0, quad, POINTS)
        expected = np.real(
            np.exp(1j * A * POINTS[:, 0]) / (1.0 + 1j * A * np.sin(POINTS[:, 1]))
        )
        assert_allclose(values, expected, atol=1e-9)

    def test_linear_and_positive(self):
        """Test linearity in g and T g >= 0 for g >= 0."""
        f = near_basic()
        quad = TpsiQuadrature.for_tolerance(0.7, 1e-8)

        def g1(y):
            return 1.0 + np.cos(y[:, 1])

        def g2(y):
            return np.sin(A * y[:, 0]) ** 2

        t1 = apply_T(f, g1, 0.7, quad, POINTS, g_sup=2.0)
        t2 = apply_T(f, g2, 0.7, quad, POINTS)
        combined = apply_T(f, lambda y: 3.0 * g1(y) + g2(y), 0.7, quad, POINTS, g_sup=7.0)
        assert np.all(t1 >= 0) and np.all(t2 >= 0)
        assert_allclose(combined, 3.0 * t1 + t2, atol=1e-12)

    @pytest.mark.parametrize("mode", [(1, 0), (1, 1)])
    def test_operator_identity(self, mode):
        """Test (kappa + u.grad) T g = g on a grid for the basic shear."""
        f = SpectralField.basic(A, 2, 4)
        g = SpectralField.from_modes(A, 2, 4, {mode: 1.0})
        quad = TpsiQuadrature.for_tolerance(2.0, 1e-10, g_sup=1.0)
        assert operator_identity_error(f, g, 2.0, quad, shape=(32, 32)) < 1e-6


class TestConditionCheck:
    """Test the regularity conditions."""

    def test_basic_flow_margins(self):
        """Test margins 1/2 and kappa^2/4 for psi*."""
        report = condition_check(SpectralField.basic(A, 2, 4), 0.6)
        assert report.cond13 and report.cond14
        assert report.margins["cond13"] == 0.5
        assert_allclose(report.margins["cond14"], 0.09)

    def test_single_mode_fails_small_ball(self):
        """Test that 0.1 cos(a x1 + x2) leaves the ball at kappa = 0.2."""
        report = condition_check(near_basic(0.1), 0.2)
        assert not report.cond14

    def test_large_kappa(self):
        """Test that the ball condition holds once kappa is large."""
        assert condition_check(near_basic(0.1), 10.0).cond14

    def test_to_dict(self):
        """Test the JSON layout of the report."""
        payload = condition_check(SpectralField.basic(A, 2, 4), 1.0).to_dict()
        assert set(payload) == {"cond13", "cond14", "cond22", "margins"}


class TestLagrangianResidual:
    """Test the Lagrangian cross-check of steady states."""

    def test_sample_points(self):
        """Test the 8x8 interior grid."""
        points = sample_points(A)
        assert points.shape == (64, 2)
        assert np.all(points > 0)
        assert np.all(points[:, 0] < 2 * np.pi / A)
        assert np.all(points[:, 1] < 2 * np.pi)

    @pytest.mark.parametrize("kappa", [0.1, 0.5, 1.0])
    def test_basic_flow_passes(self, kappa):
        """Test that psi* passes below 1e-6."""
        f = SpectralField.basic(A, 8, 32)
        quad = TpsiQuadrature.for_tolerance(kappa, 1e-8)
        report = lagrangian_residual(f, kappa, quad)
        assert report.max_error < 1e-6
        assert report.errors.size == 64
        verification_gate(report, 1e-6)
        assert VERIFICATION_GATE_TOTAL.labels(status="pass")._value.get() == 1

    def test_non_steady_field_fails(self):
        """Test that a non-solution fails by at least 100x the gate."""
        f = near_basic(0.3, 8, 32)
        quad = TpsiQuadrature.for_tolerance(0.5, 1e-8)
        report = lagrangian_residual(f, 0.5, quad)
        assert report.max_error >= 100 * 1e-5
        with pytest.raises(VerificationGateError) as info:
            verification_gate(report, 1e-5)
        assert info.value.value == report.max_error
        assert VERIFICATION_GATE_TOTAL.labels(status="fail")._value.get() == 1

    def test_outside_hypotheses_flagged(self):
        """Test the flag when neither regularity condition holds."""
        f = near_basic(0.3, 2, 4)
        quad = TpsiQuadrature.for_tolerance(0.5, 1e-6)
        report = lagrangian_residual(f, 0.5, quad, points=POINTS)
        assert report.flags == ["outside regularity hypotheses"]
        payload = report.to_dict()
        assert payload["points"] == 4
        assert payload["lagrangian_residual"] == report.max_error

    @pytest.mark.slow
    def test_branch_points_pass(self, bifurcation_study, default_config):
        """Test that every accepted branch point passes the 1e-5 gate."""
        points = bifurcation_study.switch.plus.points[1:]
        assert {p.field.N for p in points} == {default_config.problem.branch_N}
        for point in points:
            report = lagrangian_check(point.field, point.kappa, default_config)
            assert report.errors.size == 64
            assert report.max_error < 1e-5, f"kappa={point.kappa}"
