import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import fft as sfft

from src.analysis.spectral_domain import (
    AspectRatio,
    GridField,
    PointEvaluator,
    SpectralField,
    advect,
    advect_pair,
    analyze,
    curl_velocity,
    dealias_shape,
    grid_coordinates,
    grid_gradient,
    hessian_sup,
    inv_laplacian,
    laplacian,
    oversampled_shape,
    synthesize,
    transport_terms,
)
from src.errors import (
    ParameterError,
    PreconditionError,
    ResolutionError,
    SymmetryViolationError,
)

A = 0.8


def random_field(rng, a=A, M=4, N=8, decay=0.7):
    m = np.arange(M + 1)[:, None]
    n = np.arange(-N, N + 1)[None, :]
    coeffs = rng.standard_normal((M + 1, 2 * N + 1)) * decay ** (m + np.abs(n))
    return SpectralField(a, coeffs).enforce_zero_mean()


class TestAspectRatio:
    """Test the channel parameter checks."""

    @pytest.mark.parametrize("a", [0.0, -1.0, float("nan")])
    def test_non_positive_rejected(self, a):
        """Test that non-positive or non-finite a is a parameter error."""
        with pytest.raises(ParameterError):
            AspectRatio(a)

    @pytest.mark.parametrize("a", [1.0, 1.2])
    def test_bifurcation_range(self, a):
        """Test that bifurcation work rejects a >= 1."""
        with pytest.raises(ParameterError, match=r"a must lie in \(0,1\)"):
            AspectRatio(a).require_bifurcation_range()

    def test_theorem_range_flag(self):
        """Test the [1/sqrt(2), 1) flag including its lower endpoint."""
        assert AspectRatio(1 / math.sqrt(2)).in_theorem_range
        assert AspectRatio(0.8).in_theorem_range
        assert not AspectRatio(0.6).in_theorem_range

    def test_outside_theorem_range_warns(self, caplog_setup):
        """Test that a in (0, 1/sqrt(2)) is accepted with a warning."""
        AspectRatio(0.6).require_bifurcation_range()
        assert "outside theorem range" in caplog_setup.text

    def test_pure_utilities_accept_large_a(self):
        """Test that field utilities work for any a > 0."""
        f = SpectralField.basic(1.5, 2, 4)
        assert f.a == 1.5


class TestSpectralField:
    """Test storage invariants of the cosine representation."""

    def test_m0_entries_merged(self):
        """Test that b[0][-n] is folded into b[0][n]."""
        f = SpectralField.from_modes(A, 2, 4, {(0, 1): 0.25, (0, -1): 0.75})
        assert f.coefficient(0, 1) == 1.0
        assert f.coeffs[0, 4 - 1] == 0.0
        assert f.coefficient(0, -1) == 1.0

    def test_coefficients_read_only(self):
        """Test that stored coefficients cannot be mutated in place."""
        f = SpectralField.basic(A, 2, 4)
        with pytest.raises(ValueError):
            f.coeffs[0, 5] = 2.0

    def test_mode_outside_truncation(self):
        """Test that modes beyond (M, N) are rejected."""
        with pytest.raises(ParameterError, match="outside truncation"):
            SpectralField.from_modes(A, 2, 4, {(3, 0): 1.0})

    def test_vector_round_trip(self):
        """Test that to_vector and from_vector cover exactly the free coefficients."""
        rng = np.random.default_rng(1)
        f = random_field(rng)
        vector = f.to_vector()
        assert vector.size == 4 * 17 + 8
        assert SpectralField.from_vector(A, 4, 8, vector).allclose(f, atol=0.0)

    def test_resized_pads_and_truncates(self):
        """Test zero padding and truncation between truncation levels."""
        f = SpectralField.from_modes(A, 2, 4, {(1, 2): 0.5, (2, -4): 0.1})
        bigger = f.resized(4, 8)
        assert bigger.coefficient(1, 2) == 0.5
        assert bigger.coefficient(2, -4) == 0.1
        smaller = bigger.resized(1, 2)
        assert smaller.coefficient(1, 2) == 0.5
        assert smaller.coefficient(2, -4) == 0.0

    def test_half_period_shift(self):
        """Test that x1 -> x1 + pi/a flips odd zonal columns."""
        f = SpectralField.from_modes(A, 2, 4, {(0, 1): 1.0, (1, 1): 0.3, (2, 0): 0.2})
        g = f.shifted_half_period()
        assert g.coefficient(0, 1) == 1.0
        assert g.coefficient(1, 1) == -0.3
        assert g.coefficient(2, 0) == 0.2

    def test_arithmetic_requires_matching_truncation(self):
        """Test that fields of different truncation cannot be combined."""
        with pytest.raises(ParameterError, match="differ"):
            SpectralField.basic(A, 2, 4) + SpectralField.basic(A, 2, 5)

    def test_json_lists_nonzero_entries(self, tmp_path):
        """Test the {a, M, N, coeffs} layout and reload from disk."""
        f = SpectralField.from_modes(A, 2, 4, {(0, 1): 1.0, (1, -2): 0.123456789012345678})
        payload = json.loads(f.dumps("abc"))
        assert payload["a"] == A
        assert (payload["M"], payload["N"]) == (2, 4)
        assert payload["config_hash"] == "abc"
        assert sorted(map(tuple, payload["coeffs"])) == [
            (0, 1, 1.0),
            (1, -2, 0.12345678901234568),
        ]
        path = f.save(tmp_path / "psi.json")
        assert SpectralField.load(path).allclose(f, atol=0.0)

    def test_load_missing_file(self, tmp_path):
        """Test that loading a missing field is a FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            SpectralField.load(tmp_path / "missing.json")

    def test_load_malformed(self, tmp_path):
        """Test that malformed field JSON is a parameter error."""
        path = tmp_path / "bad.json"
        path.write_text('{"a": 0.8, "M": 2}')
        with pytest.raises(ParameterError, match="malformed"):
            SpectralField.load(path)


class TestSynthesizeAnalyze:
    """Test grid synthesis and projection."""

    def test_basic_flow_values(self):
        """Test psi* = 1 at the origin and -1 on x2 = pi."""
        ev = PointEvaluator(SpectralField.basic(A, 2, 4))
        assert_allclose(ev.values(np.array([[0.0, 0.0]])), [1.0], atol=1e-15)
        assert_allclose(
            ev.values(np.array([[0.3, math.pi], [5.0, math.pi]])), [-1.0, -1.0], atol=1e-15
        )

    def test_single_mode_phase(self):
        """Test cos(a x1 + 2 x2) at x = (pi/a, 0)."""
        f = SpectralField.from_modes(A, 2, 4, {(1, 2): 1.0})
        ev = PointEvaluator(f)
        assert_allclose(ev.values(np.array([[math.pi / A, 0.0]])), [-1.0], atol=1e-14)

    def test_synthesize_matches_pointwise(self):
        """Test that grid synthesis agrees with direct evaluation."""
        rng = np.random.default_rng(2)
        f = random_field(rng)
        shape = (12, 20)
        grid = synthesize(f, shape)
        x1, x2 = grid_coordinates(A, shape)
        points = np.stack([x1.ravel(), x2.ravel()], axis=-1)
        direct = PointEvaluator(f).values(points).reshape(shape)
        assert_allclose(grid.values, direct, atol=1e-12)

    def test_grid_too_small(self):
        """Test that an unresolved grid is a resolution error."""
        with pytest.raises(ResolutionError, match="too small"):
            synthesize(SpectralField.basic(A, 8, 32), (3, 3))

    def test_basic_round_trip(self):
        """Test analyze(synthesize(psi*)) recovers b[0][1] = 1."""
        f = SpectralField.basic(A, 4, 8)
        g = analyze(synthesize(f), A, 4, 8)
        assert abs(g.coefficient(0, 1) - 1.0) < 1e-12
        assert (g - f).max_abs() < 1e-12

    def test_constant_projected_out(self):
        """Test that a constant grid projects to the zero field."""
        g = GridField(np.ones((16, 24)), A)
        assert analyze(g, A, 4, 8).max_abs() == 0.0

    def test_random_round_trip(self):
        """Test the round trip on a random even field."""
        rng = np.random.default_rng(3)
        f = random_field(rng)
        g = analyze(synthesize(f, dealias_shape(4, 8)), A, 4, 8)
        assert (g - f).max_abs() < 1e-12

    def test_asymmetric_input_rejected(self):
        """Test that sine content raises a symmetry violation."""
        x1, x2 = grid_coordinates(A, (16, 24))
        g = GridField(np.sin(x2), A)
        with pytest.raises(SymmetryViolationError):
            analyze(g, A, 4, 8)

    def test_parseval(self):
        """Test that the grid mean square equals half the coefficient norm squared."""
        rng = np.random.default_rng(4)
        f = random_field(rng)
        grid = synthesize(f, oversampled_shape(4, 8))
        assert abs(np.mean(grid.values**2) - 0.5 * f.norm() ** 2) < 1e-12


class TestLaplacian:
    """Test the Laplacian and its inverse."""

    def test_basic_flow(self):
        """Test that Laplacian of psi* is -psi*."""
        f = SpectralField.basic(A, 2, 4)
        assert laplacian(f).allclose(-f, atol=0.0)

    def test_mode_multiplier(self):
        """Test the multiplier -(m^2 a^2 + n^2) for mode (1, 2)."""
        f = SpectralField.from_modes(A, 2, 4, {(1, 2): 1.0})
        assert_allclose(laplacian(f).coefficient(1, 2), -4.64, rtol=1e-14)

    def test_zero_field(self):
        """Test that the zero field maps to itself."""
        assert laplacian(SpectralField.zeros(A, 2, 4)).max_abs() == 0.0

    def test_inverse_of_negative_basic(self):
        """Test inv_laplacian(-psi*) = psi*."""
        f = SpectralField.basic(A, 2, 4)
        assert inv_laplacian(-f).allclose(f, atol=0.0)

    def test_inverse_round_trip(self):
        """Test inv_laplacian undoes laplacian on a zero-mean field."""
        rng = np.random.default_rng(5)
        f = random_field(rng)
        assert (inv_laplacian(laplacian(f)) - f).max_abs() < 1e-13

    def test_nonzero_mean_rejected(self):
        """Test that a nonzero mean is a precondition error."""
        f = SpectralField.from_modes(A, 2, 4, {(0, 0): 1.0})
        with pytest.raises(PreconditionError, match="zero-mean"):
            inv_laplacian(f)


class TestVelocity:
    """Test the curl velocity u = (-d2 psi, d1 psi)."""

    def test_basic_flow_velocity(self):
        """Test that psi* gives u = (sin x2, 0)."""
        f = SpectralField.basic(A, 2, 4)
        u1, u2 = curl_velocity(f)
        x1, x2 = u1.coordinates()
        assert_allclose(u1.values, np.sin(x2), atol=1e-14)
        assert_allclose(u2.values, 0.0, atol=1e-14)

    def test_zonal_mode_velocity(self):
        """Test that mode (1, 0) gives u = (0, -a sin(a x1))."""
        f = SpectralField.from_modes(A, 2, 4, {(1, 0): 1.0})
        u1, u2 = curl_velocity(f)
        x1, x2 = u2.coordinates()
        assert_allclose(u1.values, 0.0, atol=1e-14)
        assert_allclose(u2.values, -A * np.sin(A * x1), atol=1e-14)

    def test_divergence_free(self):
        """Test that the discrete divergence vanishes."""
        rng = np.random.default_rng(6)
        f = random_field(rng)
        u1, u2 = curl_velocity(f, (16, 32))
        d1, _ = grid_gradient(u1)
        _, d2 = grid_gradient(u2)
        assert np.max(np.abs(d1.values + d2.values)) < 1e-12

    def test_point_velocity_gradient(self):
        """Test Du at points against finite differences of u."""
        rng = np.random.default_rng(7)
        ev = PointEvaluator(random_field(rng))
        x = np.array([[0.4, 1.1], [3.0, -2.0]])
        _, du = ev.velocity_and_gradient(x)
        h = 1e-6
        for j in range(2):
            step = np.zeros(2)
            step[j] = h
            fd = (ev.velocity(x + step) - ev.velocity(x - step)) / (2 * h)
            assert_allclose(du[:, :, j], fd, atol=1e-7)

    def test_hessian_sup_of_basic_flow(self):
        """Test that the Hessian sup norm of psi* is 1."""
        assert_allclose(hessian_sup(SpectralField.basic(A, 2, 4)), 1.0, rtol=1e-14)


class TestAdvect:
    """Test the dealiased nonlinear term."""

    def test_basic_flow_is_steady(self):
        """Test that a zonal flow does not advect its own vorticity."""
        assert advect(SpectralField.basic(A, 8, 32)).max_abs() < 1e-14

    @pytest.mark.parametrize("mode", [(1, 0), (1, 2), (2, -3), (0, 4)])
    def test_single_mode_vanishes(self, mode):
        """Test that a single cosine mode has zero self-advection."""
        f = SpectralField.from_modes(A, 3, 6, {mode: 1.0})
        assert advect(f).max_abs() < 1e-12

    def test_two_mode_expansion(self):
        """Test cos x2 + eps cos(a x1 + x2) against the hand expansion."""
        eps = 0.3
        f = SpectralField.from_modes(A, 3, 6, {(0, 1): 1.0, (1, 1): eps})
        result = advect(f)
        expected = SpectralField.from_modes(
            A, 3, 6, {(1, 0): eps * A**3 / 2, (1, 2): -eps * A**3 / 2}
        )
        assert (result - expected).max_abs() < 1e-10

    def test_quadratic_scaling(self):
        """Test advect(alpha f) = alpha^2 advect(f)."""
        rng = np.random.default_rng(8)
        f = random_field(rng)
        alpha = -1.7
        assert (advect(alpha * f) - alpha**2 * advect(f)).max_abs() < 1e-12

    def test_even_subspace_closure(self):
        """Test that the grid product of an even field carries no sine content."""
        rng = np.random.default_rng(9)
        f = random_field(rng)
        terms = transport_terms(f.coeffs, A, dealias_shape(4, 8))
        product = terms[0] * terms[2] + terms[1] * terms[3]
        spectrum = sfft.fft2(product, norm="forward")
        assert np.max(np.abs(spectrum.imag)) < 1e-12 * max(1.0, np.max(np.abs(product)))

    def test_skew_symmetry(self):
        """Test that g (curl f).grad g integrates to zero."""
        rng = np.random.default_rng(10)
        f = random_field(rng)
        g = random_field(rng)
        shape = oversampled_shape(4, 8)
        u1, u2 = curl_velocity(f, shape)
        gg = synthesize(g, shape)
        g1, g2 = grid_gradient(gg)
        integrand = gg.values * (u1.values * g1.values + u2.values * g2.values)
        assert abs(np.mean(integrand)) < 1e-10

    def test_bilinear_pair(self):
        """Test advect_pair(f, f) equals advect(f)."""
        rng = np.random.default_rng(11)
        f = random_field(rng)
        assert advect_pair(f, f).allclose(advect(f), atol=1e-14)

    def test_resolution_error(self):
        """Test that a grid below the 2/3 rule is rejected."""
        f = SpectralField.basic(A, 4, 8)
        with pytest.raises(ResolutionError):
            advect(f, (10, 20))
