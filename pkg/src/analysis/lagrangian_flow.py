"""
Lagrangian verification channel.

Trajectories follow the drift equation dy/dt = s·u(y) with u = ∇×ψ and
s = -1 by default. With that sign the weighted trajectory average

    T_ψ g(x) = ∫_0^∞ e^{-κs} g(y(x, s)) ds

inverts κ + u·∇, so a steady state must satisfy -Δψ = κ T_ψ ψ*. Velocities
come from exact cosine-series evaluation at the trajectory points.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from ..errors import HorizonError, ParameterError, VerificationGateError
from ..logging_config import get_logger, log_solver_event
from ..metrics import VERIFICATION_GATE_TOTAL
from .spectral_domain import (
    GridField,
    PointEvaluator,
    Shape,
    SpectralField,
    curl_velocity,
    grid_coordinates,
    grid_gradient,
    hessian_sup,
    oversampled_shape,
)

logger = get_logger(__name__)

AS_WRITTEN = -1.0
SQRT2 = math.sqrt(2.0)
SQRT5 = math.sqrt(5.0)

ScalarFunction = Callable[[np.ndarray], np.ndarray]


def trajectory_sign(name: Union[str, float]) -> float:
    """Map the configured sign ('as_written' or 'reversed') to ±1."""
    if isinstance(name, (int, float)):
        if name not in (-1, 1):
            raise ParameterError(f"trajectory sign must be ±1, got {name}")
        return float(name)
    signs = {"as_written": AS_WRITTEN, "reversed": -AS_WRITTEN}
    if name not in signs:
        raise ParameterError(f"unknown trajectory sign '{name}'")
    return signs[name]


@dataclass(frozen=True)
class FlowMapSample:
    x: Tuple[float, float]
    t: float
    y: Tuple[float, float]
    grad_y: Optional[np.ndarray]
    det_err: Optional[float]


@dataclass(eq=False)
class FlowMapSeries:
    """Trajectory data at output times; arrays are indexed [time, point, ...]."""

    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    grad_y: Optional[np.ndarray] = None
    det_err: Optional[np.ndarray] = None
    det_err_max: float = 0.0

    def samples(self) -> Iterator[FlowMapSample]:
        for k, t in enumerate(self.t):
            for p in range(self.x.shape[0]):
                grad = self.grad_y[k, p] if self.grad_y is not None else None
                det = float(self.det_err[k, p]) if self.det_err is not None else None
                yield FlowMapSample(
                    x=(float(self.x[p, 0]), float(self.x[p, 1])),
                    t=float(t),
                    y=(float(self.y[k, p, 0]), float(self.y[k, p, 1])),
                    grad_y=grad,
                    det_err=det,
                )


class _Drift:
    """Velocity (and its gradient) at unwrapped points, reduced to the cell."""

    def __init__(self, f: SpectralField, sign: float):
        self.evaluator = PointEvaluator(f)
        self.sign = sign
        self.period = np.array([2.0 * np.pi / f.a, 2.0 * np.pi])

    def velocity(self, y: np.ndarray) -> np.ndarray:
        return self.sign * self.evaluator.velocity(np.mod(y, self.period))

    def with_gradient(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u, du = self.evaluator.velocity_and_gradient(np.mod(y, self.period))
        return self.sign * u, self.sign * du


def _rk4_position(drift: _Drift, y: np.ndarray, h: float) -> np.ndarray:
    k1 = drift.velocity(y)
    k2 = drift.velocity(y + 0.5 * h * k1)
    k3 = drift.velocity(y + 0.5 * h * k2)
    k4 = drift.velocity(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_with_gradient(
    drift: _Drift, y: np.ndarray, F: np.ndarray, h: float
) -> Tuple[np.ndarray, np.ndarray]:
    def rhs(yy, FF):
        u, du = drift.with_gradient(yy)
        return u, du @ FF

    k1y, k1F = rhs(y, F)
    k2y, k2F = rhs(y + 0.5 * h * k1y, F + 0.5 * h * k1F)
    k3y, k3F = rhs(y + 0.5 * h * k2y, F + 0.5 * h * k2F)
    k4y, k4F = rhs(y + h * k3y, F + h * k3F)
    y_new = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    F_new = F + (h / 6.0) * (k1F + 2.0 * k2F + 2.0 * k3F + k4F)
    return y_new, F_new


def _substeps(gap: float, dt: float) -> Tuple[int, float]:
    if gap <= 0.0:
        return 0, 0.0
    count = max(1, int(math.ceil(gap / dt - 1e-12)))
    return count, gap / count


def _det_err(F: np.ndarray) -> np.ndarray:
    return np.abs(np.linalg.det(F) - 1.0)


def _check_times(t_end: float, dt: float) -> None:
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if t_end < 0:
        raise ParameterError(f"t_end must be non-negative, got {t_end}")


def _as_points(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float)).reshape(-1, 2)


def _output_times(t_end: float, n_output: int) -> np.ndarray:
    return np.linspace(0.0, t_end, max(1, n_output) + 1)


def integrate_trajectory(
    f: SpectralField,
    x,
    t_end: float,
    dt: float,
    n_output: int = 10,
    sign: float = AS_WRITTEN,
) -> FlowMapSeries:
    """
    Classical RK4 for dy/dt = sign·u(y), y(0) = x.

    ``x`` is one point or an array (P, 2). Positions are returned unwrapped
    at ``n_output + 1`` evenly spaced times; steps never exceed ``dt``.
    """
    _check_times(t_end, dt)
    drift = _Drift(f, sign)
    points = _as_points(x)
    times = _output_times(t_end, n_output)
    y = points.copy()
    out = [y.copy()]
    for t0, t1 in zip(times[:-1], times[1:]):
        count, h = _substeps(t1 - t0, dt)
        for _ in range(count):
            y = _rk4_position(drift, y, h)
        out.append(y.copy())
    return FlowMapSeries(x=points, t=times, y=np.stack(out))


def flow_gradient(
    f: SpectralField,
    x,
    t_end: float,
    dt: float,
    n_output: int = 10,
    sign: float = AS_WRITTEN,
) -> FlowMapSeries:
    """
    Trajectory together with F = ∂y/∂x from F' = sign·Du(y)F, F(0) = I.

    ``det_err_max`` tracks |det F - 1| over every step, not only the
    output times.
    """
    _check_times(t_end, dt)
    drift = _Drift(f, sign)
    points = _as_points(x)
    times = _output_times(t_end, n_output)
    y = points.copy()
    F = np.broadcast_to(np.eye(2), (points.shape[0], 2, 2)).copy()
    ys, Fs, dets = [y.copy()], [F.copy()], [_det_err(F)]
    det_max = 0.0
    for t0, t1 in zip(times[:-1], times[1:]):
        count, h = _substeps(t1 - t0, dt)
        for _ in range(count):
            y, F = _rk4_with_gradient(drift, y, F, h)
            det_max = max(det_max, float(np.max(_det_err(F))))
        ys.append(y.copy())
        Fs.append(F.copy())
        dets.append(_det_err(F))
    return FlowMapSeries(
        x=points,
        t=times,
        y=np.stack(ys),
        grad_y=np.stack(Fs),
        det_err=np.stack(dets),
        det_err_max=det_max,
    )


@dataclass(frozen=True)
class GrowthBoundReport:
    grad_u_sup: float
    epsilon: float
    cond13: bool
    samples: int
    violations_gradient: int
    violations_perturbation: Optional[int]
    min_slack_gradient: float
    min_slack_perturbation: Optional[float]
    max_ratio_gradient: float
    notice: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.violations_gradient == 0 and not self.violations_perturbation


def check_growth_bounds(
    f: SpectralField, series: FlowMapSeries, t_end: Optional[float] = None
) -> GrowthBoundReport:
    """
    Compare |∇y| (Frobenius) with √2·e^{5t‖∇u‖/4} and, when
    ‖∇u - ∇u*‖ <= 1/2, with (√2 + √5 t)·e^{2t√‖∇u - ∇u*‖}.
    """
    if series.grad_y is None:
        raise ParameterError("growth bounds need a flow-gradient series")
    basic = SpectralField.basic(f.a, f.M, f.N)
    grad_u = hessian_sup(f)
    epsilon = hessian_sup(f - basic)
    cond13 = epsilon <= 0.5

    keep = series.t <= (t_end if t_end is not None else series.t[-1]) + 1e-12
    t = series.t[keep][:, None]
    norms = np.linalg.norm(series.grad_y[keep], axis=(-2, -1))
    rhs_gradient = SQRT2 * np.exp(1.25 * t * grad_u)
    slack_gradient = rhs_gradient - norms
    # equality at t = 0
    violations_gradient = int(np.sum(slack_gradient < -1e-12 * rhs_gradient))

    violations_perturbation: Optional[int] = None
    min_slack_perturbation: Optional[float] = None
    notice = None
    if cond13:
        rhs_perturbation = (SQRT2 + SQRT5 * t) * np.exp(2.0 * t * math.sqrt(epsilon))
        slack_perturbation = rhs_perturbation - norms
        violations_perturbation = int(np.sum(slack_perturbation < -1e-12 * rhs_perturbation))
        min_slack_perturbation = float(np.min(slack_perturbation))
    else:
        notice = "shear perturbation above 1/2: perturbation growth bound skipped"
        logger.warning(
            "Perturbation growth bound skipped", extra={"epsilon": epsilon}
        )

    return GrowthBoundReport(
        grad_u_sup=grad_u,
        epsilon=epsilon,
        cond13=cond13,
        samples=int(norms.size),
        violations_gradient=violations_gradient,
        violations_perturbation=violations_perturbation,
        min_slack_gradient=float(np.min(slack_gradient)),
        min_slack_perturbation=min_slack_perturbation,
        max_ratio_gradient=float(np.max(norms / rhs_gradient)),
        notice=notice,
    )


@dataclass(frozen=True)
class TpsiQuadrature:
    """Composite Gauss–Legendre rule on [0, s_max] with the weight e^{-κs} folded in."""

    kappa: float
    s_max: float
    n_panels: int
    order: int = 8
    tol: float = 1e-8
    rule: str = "gauss-legendre"

    def __post_init__(self):
        if not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        if not self.s_max > 0 or self.n_panels < 1 or self.order < 1:
            raise ParameterError(
                "quadrature needs s_max > 0, n_panels >= 1 and order >= 1",
                s_max=self.s_max,
                n_panels=self.n_panels,
                order=self.order,
            )

    @classmethod
    def for_tolerance(
        cls,
        kappa: float,
        tol: float,
        g_sup: float = 1.0,
        order: int = 8,
        max_panel: float = 1.0,
    ) -> "TpsiQuadrature":
        if not kappa > 0 or not tol > 0:
            raise ParameterError(f"kappa and tol must be positive, got ({kappa}, {tol})")
        s_max = max(horizon_for(kappa, tol, g_sup), 1.0 / kappa)
        panel = min(max_panel, 2.0 / kappa)
        n_panels = int(math.ceil(s_max / panel))
        return cls(kappa=kappa, s_max=s_max, n_panels=n_panels, order=order, tol=tol)

    @property
    def n_steps(self) -> int:
        return self.n_panels * self.order

    def trajectory_step(self, dt: float) -> float:
        """RK4 step no longer than ``dt``, one panel, or tol^(1/4)."""
        return min(dt, self.s_max / self.n_panels, self.tol**0.25)

    def nodes_and_weights(self) -> Tuple[np.ndarray, np.ndarray]:
        x, w = np.polynomial.legendre.leggauss(self.order)
        h = self.s_max / self.n_panels
        starts = np.arange(self.n_panels)[:, None] * h
        nodes = (starts + 0.5 * h * (x + 1.0)).ravel()
        weights = np.tile(0.5 * h * w, self.n_panels) * np.exp(-self.kappa * nodes)
        return nodes, weights

    def tail_bound(self, g_sup: float = 1.0) -> float:
        return math.exp(-self.kappa * self.s_max) * g_sup / self.kappa


def horizon_for(kappa: float, tol: float, g_sup: float = 1.0) -> float:
    """s_max with tail e^{-κ s_max}‖g‖/κ equal to tol/10."""
    return math.log(10.0 * max(g_sup, 1e-300) / (kappa * tol)) / kappa


def _as_function(g: Union[SpectralField, ScalarFunction]) -> Tuple[ScalarFunction, float]:
    if isinstance(g, SpectralField):
        evaluator = PointEvaluator(g)
        return evaluator.values, float(np.sum(np.abs(g.coeffs)))
    return g, 1.0


def apply_T(
    f: SpectralField,
    g: Union[SpectralField, ScalarFunction],
    kappa: float,
    quad: TpsiQuadrature,
    x,
    dt: float = 0.02,
    sign: float = AS_WRITTEN,
    g_sup: Optional[float] = None,
) -> np.ndarray:
    """
    T_ψ g at the points ``x`` (P, 2).

    ``g`` is a SpectralField or a vectorized callable on (P, 2) arrays with
    sup norm ``g_sup`` (default: coefficient sum for fields, 1 otherwise).
    Trajectory steps are at most ``quad.trajectory_step(dt)`` and land on
    every quadrature node.
    """
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if abs(quad.kappa - kappa) > 1e-15 * kappa:
        raise ParameterError(f"quadrature built for kappa={quad.kappa}, not {kappa}")
    func, default_sup = _as_function(g)
    g_sup = default_sup if g_sup is None else g_sup
    tail = quad.tail_bound(g_sup)
    if tail > quad.tol:
        suggested = horizon_for(kappa, quad.tol, g_sup)
        raise HorizonError(
            f"quadrature tail {tail:.3e} exceeds tolerance {quad.tol:.3e}",
            suggested_s_max=suggested,
            s_max=quad.s_max,
        )

    dt = quad.trajectory_step(dt)
    drift = _Drift(f, sign)
    nodes, weights = quad.nodes_and_weights()
    y = _as_points(x).copy()
    total = np.zeros(y.shape[0])
    t = 0.0
    for node, weight in zip(nodes, weights):
        count, h = _substeps(node - t, dt)
        for _ in range(count):
            y = _rk4_position(drift, y, h)
        t = node
        total += weight * func(y)
    return total


def basic_forcing(y: np.ndarray) -> np.ndarray:
    """ψ* = cos x2 at (P, 2) points."""
    return np.cos(y[:, 1])


def sample_points(a: float, k: int = 8) -> np.ndarray:
    """k×k interior tensor grid at cell centres, shape (k², 2)."""
    if k < 1:
        raise ParameterError(f"sample grid size must be >= 1, got {k}")
    offsets = (np.arange(k) + 0.5) / k
    x1, x2 = np.meshgrid(offsets * 2.0 * np.pi / a, offsets * 2.0 * np.pi, indexing="ij")
    return np.column_stack([x1.ravel(), x2.ravel()])


@dataclass(frozen=True)
class ConditionReport:
    cond13: bool
    cond14: bool
    cond22: bool
    margins: Dict[str, float]

    @property
    def regular(self) -> bool:
        return self.cond14 or self.cond22

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cond13": self.cond13,
            "cond14": self.cond14,
            "cond22": self.cond22,
            "margins": dict(self.margins),
        }


def condition_check(
    f: SpectralField, kappa: float, shape: Optional[Shape] = None
) -> ConditionReport:
    """
    Smallness conditions on the oversampled grid:

    - cond13: ‖∇²(ψ - ψ*)‖ <= 1/2
    - cond14: ‖∇²(ψ - ψ*)‖ < κ²/4
    - cond22: ‖∇²ψ‖ < 4κ/5
    """
    shape = shape or oversampled_shape(f.M, f.N)
    deviation = hessian_sup(f - SpectralField.basic(f.a, f.M, f.N), shape)
    total = hessian_sup(f, shape)
    margins = {
        "cond13": 0.5 - deviation,
        "cond14": kappa * kappa / 4.0 - deviation,
        "cond22": 0.8 * kappa - total,
    }
    return ConditionReport(
        cond13=margins["cond13"] >= 0.0,
        cond14=margins["cond14"] > 0.0,
        cond22=margins["cond22"] > 0.0,
        margins=margins,
    )


@dataclass(frozen=True)
class LagrangianReport:
    kappa: float
    max_error: float
    errors: np.ndarray
    conditions: ConditionReport
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kappa": self.kappa,
            "lagrangian_residual": self.max_error,
            "points": int(self.errors.size),
            "flags": list(self.flags),
            **self.conditions.to_dict(),
        }


def lagrangian_residual(
    f: SpectralField,
    kappa: float,
    quad: TpsiQuadrature,
    points: Optional[np.ndarray] = None,
    dt: float = 0.02,
    sign: float = AS_WRITTEN,
) -> LagrangianReport:
    """max |-Δψ(x) - κ T_ψ ψ*(x)| over the sample points."""
    points = sample_points(f.a) if points is None else _as_points(points)
    conditions = condition_check(f, kappa)
    flags: List[str] = []
    if not conditions.regular:
        flags.append("outside regularity hypotheses")
        logger.warning(
            "Neither regularity condition holds; residual still computed",
            extra={"kappa": kappa, **conditions.margins},
        )
    lhs = PointEvaluator(f).negative_laplacian(points)
    rhs = kappa * apply_T(f, basic_forcing, kappa, quad, points, dt=dt, sign=sign)
    errors = np.abs(lhs - rhs)
    report = LagrangianReport(
        kappa=float(kappa),
        max_error=float(np.max(errors)),
        errors=errors,
        conditions=conditions,
        flags=flags,
    )
    logger.debug(
        "Lagrangian residual evaluated",
        extra={"kappa": kappa, "max_error": report.max_error, "points": errors.size},
    )
    return report


def verification_gate(report: LagrangianReport, tol: float) -> LagrangianReport:
    """Raise VerificationGateError when the residual is not below ``tol``."""
    if report.max_error < tol:
        VERIFICATION_GATE_TOTAL.labels(status="pass").inc()
        log_solver_event(
            logger, "gate", "checked", "pass", max_error=report.max_error, tol=tol
        )
        return report
    VERIFICATION_GATE_TOTAL.labels(status="fail").inc()
    log_solver_event(logger, "gate", "checked", "fail", max_error=report.max_error, tol=tol)
    raise VerificationGateError(
        f"Lagrangian residual {report.max_error:.3e} not below {tol:.3e}",
        value=report.max_error,
        tolerance=tol,
    )


def operator_identity_error(
    f: SpectralField,
    g: Union[SpectralField, ScalarFunction],
    kappa: float,
    quad: TpsiQuadrature,
    shape: Shape = (32, 32),
    dt: float = 0.02,
    sign: float = AS_WRITTEN,
) -> float:
    """
    max |(κ + u·∇)T_ψ g - g| on a grid, with T_ψ g sampled on the grid and
    differentiated spectrally. Holds for the as-written trajectory sign.
    """
    x1, x2 = grid_coordinates(f.a, shape)
    points = np.column_stack([x1.ravel(), x2.ravel()])
    values = apply_T(f, g, kappa, quad, points, dt=dt, sign=sign).reshape(shape)
    tg = GridField(values, f.a)
    d1, d2 = grid_gradient(tg)
    u1, u2 = curl_velocity(f, shape)
    applied = kappa * values + u1.values * d1.values + u2.values * d2.values
    func, _ = _as_function(g)
    return float(np.max(np.abs(applied - func(points).reshape(shape))))
