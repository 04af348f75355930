"""
Steady states of the forced dissipative vorticity equation.

The steady residual is

    R(ψ, κ) = (∇×ψ)·∇Δψ + κΔ(ψ - ψ*)

evaluated pseudo-spectrally on a dealiased grid. Unknowns are the free
coefficients of a SpectralField (m = 0 column restricted to n >= 1). The
Jacobian is assembled densely from the analytic directional derivative
J(ψ, h) + J(h, ψ) + κΔh, one batch of basis directions per FFT pass.
"""

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, optimize

from ..errors import (
    NonConvergenceError,
    NumericalFailure,
    ParameterError,
    PreconditionError,
    SingularJacobianError,
    SolverFailure,
)
from ..logging_config import get_logger, log_metric_event, log_solver_event
from ..metrics import (
    BRANCH_POINTS_TOTAL,
    CONTINUATION_ACTIVE,
    NEWTON_ITERATIONS_TOTAL,
    NEWTON_SOLVES_TOTAL,
    PROBE_TRIALS_TOTAL,
)
from .linear_operator import Eigenfunction
from .spectral_domain import (
    AspectRatio,
    Shape,
    SpectralField,
    advect,
    advect_pair,
    check_resolution,
    dealias_shape,
    free_mask,
    hessian_sup,
    laplacian,
    project_grid,
    transport_terms,
    wavenumber_squared,
)

logger = get_logger(__name__)

BASIC_AMPLITUDE_TOL = 1e-10


@dataclass(frozen=True)
class SteadyResidualConfig:
    a: float
    M: int = 8
    N: int = 32
    grid: Optional[Shape] = None
    newton_tol: float = 1e-10
    max_iter: int = 30
    fd_step: float = 1e-7
    min_damping: float = 1.0 / 64.0
    jacobian_chunk: int = 128

    def __post_init__(self):
        AspectRatio(float(self.a))
        if self.M < 0 or self.N < 1:
            raise ParameterError(f"truncation requires M >= 0 and N >= 1, got ({self.M}, {self.N})")
        if not self.newton_tol > 0:
            raise ParameterError(f"newton_tol must be positive, got {self.newton_tol}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.grid is not None:
            check_resolution(self.M, self.N, tuple(self.grid), dealiased=True)

    @property
    def shape(self) -> Shape:
        return tuple(self.grid) if self.grid is not None else dealias_shape(self.M, self.N)

    @property
    def size(self) -> int:
        return int(np.count_nonzero(free_mask(self.M, self.N)))

    def basic(self) -> SpectralField:
        return SpectralField.basic(self.a, self.M, self.N)

    def field(self, vector: np.ndarray) -> SpectralField:
        return SpectralField.from_vector(self.a, self.M, self.N, vector)

    def free_beta(self) -> np.ndarray:
        return wavenumber_squared(self.a, self.M, self.N)[free_mask(self.M, self.N)]

    def check_field(self, f: SpectralField) -> None:
        if f.a != self.a or f.M != self.M or f.N != self.N:
            raise ParameterError(
                f"field (a={f.a}, M={f.M}, N={f.N}) does not match solver "
                f"configuration (a={self.a}, M={self.M}, N={self.N})"
            )
        if f.mean != 0.0:
            raise PreconditionError(f"steady problem needs a zero-mean field, b[0][0] = {f.mean}")


@dataclass(frozen=True, eq=False)
class BranchPoint:
    field: SpectralField
    kappa: float
    s: float
    amplitude: float
    residual_norm: float
    iterations: int = 0

    def row(self) -> Tuple[float, float, float, float]:
        return (self.s, self.kappa, self.amplitude, self.residual_norm)


@dataclass(eq=False)
class Branch:
    label: str
    points: List[BranchPoint] = field(default_factory=list)
    provenance: List[Dict[str, Any]] = field(default_factory=list)
    events: List[Dict[str, Any]] = field(default_factory=list)
    terminated: bool = False
    termination_reason: Optional[str] = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def kappas(self) -> np.ndarray:
        return np.array([p.kappa for p in self.points])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([p.amplitude for p in self.points])

    def bifurcation_bracket(self) -> Optional[Tuple[float, float]]:
        for event in self.events:
            if event["type"] == "bifurcation":
                lo, hi = sorted(event["kappa_bracket"])
                return lo, hi
        return None

    def side(self, kappa_c: float) -> str:
        """Which side of κ_c the nontrivial points lie on."""
        offsets = self.kappas[1:] - kappa_c
        if offsets.size == 0:
            return "undetermined"
        return "below" if float(np.mean(offsets)) < 0 else "above"

    def pitchfork_coefficient(self, kappa_c: float, count: int = 5) -> float:
        """Least-squares slope of amplitude² against κ_c - κ near the root."""
        x = kappa_c - self.kappas[1 : count + 1]
        y = self.amplitudes[1 : count + 1] ** 2
        denom = float(np.dot(x, x))
        return float(np.dot(x, y) / denom) if denom > 0 else float("nan")


@dataclass(frozen=True)
class ContinuationConfig:
    ds: float = 0.005
    ds_min: float = 1e-6
    ds_max: float = 0.008
    max_steps: int = 12
    growth: float = 1.5
    shrink: float = 0.5
    fast_iterations: int = 3
    max_corrector_iter: int = 12
    kappa_min: Optional[float] = None
    kappa_max: Optional[float] = None
    monitor_bifurcations: bool = False
    stop_on_bifurcation: bool = False

    def __post_init__(self):
        if not 0 < self.ds_min <= self.ds <= self.ds_max:
            raise ParameterError(
                f"step sizes must satisfy 0 < ds_min <= ds <= ds_max, got "
                f"({self.ds_min}, {self.ds}, {self.ds_max})"
            )
        if self.max_steps < 1:
            raise ParameterError(f"max_steps must be >= 1, got {self.max_steps}")


def steady_residual(
    f: SpectralField, kappa: float, shape: Optional[Shape] = None
) -> SpectralField:
    """(∇×ψ)·∇Δψ + κΔ(ψ - ψ*)."""
    if f.mean != 0.0:
        raise PreconditionError(f"steady residual needs a zero-mean field, b[0][0] = {f.mean}")
    basic = SpectralField.basic(f.a, f.M, f.N)
    return advect(f, shape) + laplacian(f - basic) * kappa


def jacobian_action(
    f: SpectralField, h: SpectralField, kappa: float, shape: Optional[Shape] = None
) -> SpectralField:
    """Directional derivative of the steady residual at f along h."""
    return advect_pair(f, h, shape) + advect_pair(h, f, shape) + laplacian(h) * kappa


def finite_difference_action(
    f: SpectralField, h: SpectralField, kappa: float, cfg: SteadyResidualConfig
) -> SpectralField:
    """Central difference of the steady residual along h with step cfg.fd_step."""
    t = cfg.fd_step
    forward = steady_residual(f + h * t, kappa, cfg.shape)
    backward = steady_residual(f - h * t, kappa, cfg.shape)
    return (forward - backward) * (0.5 / t)


def _residual_vector(cfg: SteadyResidualConfig, v: np.ndarray, kappa: float) -> np.ndarray:
    return steady_residual(cfg.field(v), kappa, cfg.shape).to_vector()


def steady_jacobian(f: SpectralField, kappa: float, cfg: SteadyResidualConfig) -> np.ndarray:
    """Dense Jacobian in free-coefficient coordinates."""
    M, N = f.M, f.N
    shape = cfg.shape
    mask = free_mask(M, N)
    rows, cols = np.nonzero(mask)
    size = rows.size
    beta = wavenumber_squared(f.a, M, N)
    base = transport_terms(f.coeffs, f.a, shape)
    jac = np.empty((size, size))
    for start in range(0, size, cfg.jacobian_chunk):
        idx = np.arange(start, min(size, start + cfg.jacobian_chunk))
        basis = np.zeros((idx.size, M + 1, 2 * N + 1))
        basis[np.arange(idx.size), rows[idx], cols[idx]] = 1.0
        terms = transport_terms(basis, f.a, shape)
        product = (
            base[0] * terms[:, 2]
            + base[1] * terms[:, 3]
            + terms[:, 0] * base[2]
            + terms[:, 1] * base[3]
        )
        out = project_grid(product, M, N) - kappa * beta * basis
        jac[:, idx] = out[:, mask].T
    return jac


def _solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            solution = linalg.solve(matrix, rhs)
        except (linalg.LinAlgError, linalg.LinAlgWarning) as e:
            raise SingularJacobianError(f"singular linear solve: {e}") from e
    # some LAPACK paths return inf/nan for an exactly singular diagonal
    if not np.all(np.isfinite(solution)):
        raise SingularJacobianError("singular linear solve: non-finite solution")
    return solution


def newton_solve(
    f0: SpectralField, kappa: float, cfg: SteadyResidualConfig
) -> BranchPoint:
    """
    Damped Newton iteration from f0 at fixed κ.

    Raises NonConvergenceError after ``cfg.max_iter`` iterations and
    SingularJacobianError when the linear solve breaks down.
    """
    cfg.check_field(f0)
    basic = cfg.basic()
    v = f0.to_vector()
    r = _residual_vector(cfg, v, kappa)
    rn = float(np.linalg.norm(r))
    iterations = 0

    try:
        while rn >= cfg.newton_tol:
            if iterations >= cfg.max_iter:
                raise NonConvergenceError(
                    f"Newton did not converge in {cfg.max_iter} iterations "
                    f"(residual {rn:.3e})",
                    last_residual=rn,
                    iterations=iterations,
                    kappa=kappa,
                )
            jac = steady_jacobian(cfg.field(v), kappa, cfg)
            step = _solve(jac, -r)
            damping = 1.0
            while True:
                trial = v + damping * step
                r_trial = _residual_vector(cfg, trial, kappa)
                rn_trial = float(np.linalg.norm(r_trial))
                if rn_trial < (1.0 - 1e-4 * damping) * rn or damping <= cfg.min_damping:
                    break
                damping *= 0.5
            v, r, rn = trial, r_trial, rn_trial
            iterations += 1
            NEWTON_ITERATIONS_TOTAL.inc()
            log_metric_event(
                logger, "newton_residual", rn, iteration=iterations, damping=damping
            )
    except NonConvergenceError:
        NEWTON_SOLVES_TOTAL.labels(outcome="nonconverged").inc()
        raise
    except SingularJacobianError:
        NEWTON_SOLVES_TOTAL.labels(outcome="singular").inc()
        raise

    NEWTON_SOLVES_TOTAL.labels(outcome="converged").inc()
    solution = cfg.field(v)
    return BranchPoint(
        field=solution,
        kappa=float(kappa),
        s=0.0,
        amplitude=(solution - basic).norm(),
        residual_norm=rn,
        iterations=iterations,
    )


def _preconditioned_trivial_jacobian(kappa: float, cfg: SteadyResidualConfig) -> np.ndarray:
    jac = steady_jacobian(cfg.basic(), kappa, cfg)
    return jac / cfg.free_beta()[:, None]


def trivial_branch_spectrum(kappa: float, a: float, cfg: SteadyResidualConfig) -> float:
    """
    Smallest singular value of the Jacobian at ψ*, rows scaled by 1/β.

    The scaling is Δ^{-1} applied to the residual; it keeps the kernel and
    makes the spectrum independent of the truncation.
    """
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if a != cfg.a:
        cfg = replace(cfg, a=float(a))
    jac = _preconditioned_trivial_jacobian(kappa, cfg)
    return float(linalg.svdvals(jac)[-1])


def signed_trivial_spectrum(kappa: float, cfg: SteadyResidualConfig) -> float:
    """Smallest singular value carrying the sign of the determinant."""
    jac = _preconditioned_trivial_jacobian(kappa, cfg)
    sign, _ = np.linalg.slogdet(jac)
    return float(sign) * float(linalg.svdvals(jac)[-1])


def locate_bifurcation(
    lo: float, hi: float, cfg: SteadyResidualConfig, xtol: float = 1e-13
) -> float:
    """Root of the signed trivial spectrum inside [lo, hi]."""
    f_lo = signed_trivial_spectrum(lo, cfg)
    f_hi = signed_trivial_spectrum(hi, cfg)
    if f_lo * f_hi > 0:
        raise SolverFailure(
            "no determinant sign change in bifurcation bracket",
            lo=lo,
            hi=hi,
            f_lo=f_lo,
            f_hi=f_hi,
        )
    kappa = optimize.brentq(lambda k: signed_trivial_spectrum(k, cfg), lo, hi, xtol=xtol)
    log_solver_event(logger, "bifurcation", "located", "success", kappa=kappa)
    return float(kappa)


def _kappa_derivative(cfg: SteadyResidualConfig, v: np.ndarray, basic_v: np.ndarray) -> np.ndarray:
    # ∂R/∂κ = Δ(ψ - ψ*)
    return -cfg.free_beta() * (v - basic_v)


def _correct(
    cfg: SteadyResidualConfig,
    cont: ContinuationConfig,
    predicted: np.ndarray,
    previous: np.ndarray,
    tangent: np.ndarray,
    ds: float,
    basic_v: np.ndarray,
) -> Tuple[np.ndarray, int, float]:
    """Newton on the residual extended by the arclength constraint."""
    z = predicted.copy()
    size = z.size - 1
    for iteration in range(cont.max_corrector_iter + 1):
        v, kappa = z[:size], float(z[size])
        r = _residual_vector(cfg, v, kappa)
        constraint = float(np.dot(tangent, z - previous) - ds)
        rn = float(np.linalg.norm(r))
        if rn < cfg.newton_tol and abs(constraint) < cfg.newton_tol:
            return z, iteration, rn
        if iteration == cont.max_corrector_iter:
            break
        extended = np.empty((size + 1, size + 1))
        extended[:size, :size] = steady_jacobian(cfg.field(v), kappa, cfg)
        extended[:size, size] = _kappa_derivative(cfg, v, basic_v)
        extended[size] = tangent
        z = z + _solve(extended, -np.append(r, constraint))
        NEWTON_ITERATIONS_TOTAL.inc()
    raise NonConvergenceError(
        f"corrector did not converge (residual {rn:.3e})",
        last_residual=rn,
        iterations=cont.max_corrector_iter,
    )


def _initial_tangent(
    cfg: SteadyResidualConfig,
    start: BranchPoint,
    direction: Union[SpectralField, float],
    basic_v: np.ndarray,
) -> np.ndarray:
    if isinstance(direction, SpectralField):
        cfg.check_field(direction)
        tangent = np.append(direction.to_vector(), 0.0)
    else:
        v = start.field.to_vector()
        jac = steady_jacobian(start.field, start.kappa, cfg)
        dv = _solve(jac, -_kappa_derivative(cfg, v, basic_v))
        tangent = np.append(dv, 1.0) * np.sign(float(direction))
    norm = float(np.linalg.norm(tangent))
    if norm == 0.0:
        raise ParameterError("continuation direction must be nonzero")
    return tangent / norm


def _determinant_sign(cfg: SteadyResidualConfig, point: BranchPoint) -> float:
    sign, _ = np.linalg.slogdet(steady_jacobian(point.field, point.kappa, cfg))
    return float(sign)


def continue_branch(
    start: BranchPoint,
    direction: Union[SpectralField, float],
    cfg: SteadyResidualConfig,
    cont: Optional[ContinuationConfig] = None,
    label: str = "branch",
) -> Branch:
    """
    Pseudo-arclength continuation from ``start``.

    ``direction`` is either a field tangent (κ component zero, used at a
    bifurcation point) or ±1 to follow the regular branch towards larger or
    smaller κ. Later steps use the secant as predictor. The step grows by
    ``growth`` after fast corrections and shrinks after failures; falling
    below ``ds_min`` terminates the branch.
    """
    cont = cont or ContinuationConfig()
    cfg.check_field(start.field)
    basic = cfg.basic()
    basic_v = basic.to_vector()
    size = cfg.size

    z = np.append(start.field.to_vector(), start.kappa)
    tangent = _initial_tangent(cfg, start, direction, basic_v)
    branch = Branch(label=label, points=[start])
    ds = cont.ds
    s = start.s
    det_sign = _determinant_sign(cfg, start) if cont.monitor_bifurcations else 0.0

    CONTINUATION_ACTIVE.labels(branch=label).set(1)
    log_solver_event(logger, "continuation", "start", "running", branch=label, kappa=start.kappa)
    try:
        while len(branch.points) - 1 < cont.max_steps:
            step = len(branch.points)
            try:
                z_new, iterations, rn = _correct(
                    cfg, cont, z + ds * tangent, z, tangent, ds, basic_v
                )
            except NumericalFailure as e:
                branch.provenance.append(
                    {"step": step, "ds": ds, "outcome": "rejected", "reason": str(e)}
                )
                logger.debug(
                    "Corrector failed, shrinking step",
                    extra={"branch": label, "ds": ds, "error_type": type(e).__name__},
                )
                ds *= cont.shrink
                if ds < cont.ds_min:
                    branch.terminated = True
                    branch.termination_reason = "step-size underflow"
                    logger.warning(
                        "Branch terminated", extra={"branch": label, "step": step}
                    )
                    break
                continue

            field_new = cfg.field(z_new[:size])
            kappa_new = float(z_new[size])
            # re-verified independently of the corrector
            rn_check = steady_residual(field_new, kappa_new, cfg.shape).norm()
            if rn_check >= cfg.newton_tol:
                branch.provenance.append(
                    {"step": step, "ds": ds, "outcome": "rejected", "reason": "post-check"}
                )
                ds *= cont.shrink
                if ds < cont.ds_min:
                    branch.terminated = True
                    branch.termination_reason = "step-size underflow"
                    break
                continue

            s += float(np.linalg.norm(z_new - z))
            point = BranchPoint(
                field=field_new,
                kappa=kappa_new,
                s=s,
                amplitude=(field_new - basic).norm(),
                residual_norm=rn_check,
                iterations=iterations,
            )
            branch.points.append(point)
            branch.provenance.append(
                {
                    "step": step,
                    "ds": ds,
                    "outcome": "accepted",
                    "corrector_iterations": iterations,
                    "kappa": kappa_new,
                    "amplitude": point.amplitude,
                }
            )
            BRANCH_POINTS_TOTAL.labels(branch=label).inc()
            logger.debug(
                "Branch point accepted",
                extra={
                    "branch": label,
                    "step": step,
                    "kappa": kappa_new,
                    "amplitude": point.amplitude,
                    "ds": ds,
                },
            )

            secant = z_new - z
            tangent = secant / float(np.linalg.norm(secant))
            z_prev_kappa = float(z[size])
            z = z_new

            if cont.monitor_bifurcations:
                sign = _determinant_sign(cfg, point)
                if sign != det_sign:
                    branch.events.append(
                        {
                            "type": "bifurcation",
                            "step": step,
                            "kappa_bracket": (z_prev_kappa, kappa_new),
                        }
                    )
                    log_solver_event(
                        logger,
                        "continuation",
                        "bifurcation_detected",
                        "flagged",
                        branch=label,
                        kappa_bracket=(z_prev_kappa, kappa_new),
                    )
                    det_sign = sign
                    if cont.stop_on_bifurcation:
                        break

            if cont.kappa_min is not None and kappa_new < cont.kappa_min:
                branch.termination_reason = "kappa_min reached"
                break
            if cont.kappa_max is not None and kappa_new > cont.kappa_max:
                branch.termination_reason = "kappa_max reached"
                break

            if iterations <= cont.fast_iterations:
                ds = min(ds * cont.growth, cont.ds_max)
    finally:
        CONTINUATION_ACTIVE.labels(branch=label).set(0)

    log_solver_event(
        logger,
        "continuation",
        "complete",
        "terminated" if branch.terminated else "success",
        branch=label,
        points=len(branch.points),
    )
    return branch


def trace_trivial_branch(
    kappa_start: float,
    cfg: SteadyResidualConfig,
    cont: Optional[ContinuationConfig] = None,
    kappa_stop: Optional[float] = None,
) -> Branch:
    """
    Follow ψ* from ``kappa_start`` towards smaller κ until the determinant
    of the Jacobian changes sign (or ``kappa_stop`` is passed).
    """
    cont = cont or ContinuationConfig()
    kappa_stop = kappa_stop if kappa_stop is not None else 0.25 * kappa_start
    trivial_cont = replace(
        cont,
        monitor_bifurcations=True,
        stop_on_bifurcation=True,
        kappa_min=kappa_stop,
        max_steps=max(cont.max_steps, 1000),
    )
    start = BranchPoint(cfg.basic(), float(kappa_start), 0.0, 0.0, 0.0)
    return continue_branch(start, -1.0, cfg, trivial_cont, label="trivial")


@dataclass(eq=False)
class SwitchResult:
    kappa_c: float
    plus: Branch
    minus: Branch
    twin_deviation: float
    twin_is_image: bool
    side: str
    pitchfork_coefficient: float

    def summary(self) -> Dict[str, Any]:
        return {
            "kappa_c": self.kappa_c,
            "points_plus": len(self.plus),
            "points_minus": len(self.minus),
            "twin_deviation": self.twin_deviation,
            "twin_is_image": self.twin_is_image,
            "side": self.side,
            "pitchfork_coefficient": self.pitchfork_coefficient,
        }


def switch_branches(
    kappa_c: float,
    eigenfunction: Eigenfunction,
    cfg: SteadyResidualConfig,
    cont: Optional[ContinuationConfig] = None,
) -> SwitchResult:
    """
    Leave ψ* at κ_c along ±eigenfunction and continue both branches.

    The minus branch is compared with the half-period translate of the
    plus branch; both are kept either way.
    """
    cont = replace(cont or ContinuationConfig(), monitor_bifurcations=False)
    tangent = eigenfunction.tangent(cfg.M, cfg.N)
    start = BranchPoint(cfg.basic(), float(kappa_c), 0.0, 0.0, 0.0)
    plus = continue_branch(start, tangent, cfg, cont, label="plus")
    minus = continue_branch(start, -tangent, cfg, cont, label="minus")

    deviation = 0.0
    for p, q in zip(plus.points, minus.points):
        image = p.field.shifted_half_period()
        deviation = max(
            deviation,
            float(np.max(np.abs(image.coeffs - q.field.coeffs))),
            abs(p.kappa - q.kappa),
        )
    twin_is_image = deviation < 1e-8 and len(plus) == len(minus)
    if not twin_is_image:
        logger.warning(
            "Twin branch is not a symmetry image; keeping both",
            extra={"deviation": deviation},
        )
    result = SwitchResult(
        kappa_c=float(kappa_c),
        plus=plus,
        minus=minus,
        twin_deviation=deviation,
        twin_is_image=twin_is_image,
        side=plus.side(kappa_c),
        pitchfork_coefficient=plus.pitchfork_coefficient(kappa_c),
    )
    log_solver_event(logger, "branch_switch", "complete", "success", **result.summary())
    return result


def random_even_perturbation(
    a: float, M: int, N: int, rng: np.random.Generator, decay: float = 0.5
) -> SpectralField:
    """Gaussian coefficients damped by decay^(m + |n|)."""
    m = np.arange(M + 1)[:, None]
    n = np.abs(np.arange(-N, N + 1))[None, :]
    coeffs = rng.standard_normal((M + 1, 2 * N + 1)) * decay ** (m + n)
    coeffs[~free_mask(M, N)] = 0.0
    return SpectralField(a, coeffs)


@dataclass(eq=False)
class ProbeReport:
    a: float
    kappa: float
    seed: Optional[int]
    outcomes: List[Dict[str, Any]]
    artifacts: List[str]

    @property
    def trials(self) -> int:
        return len(self.outcomes)

    @property
    def counts(self) -> Dict[str, int]:
        counts = {"basic": 0, "nontrivial": 0, "diverged": 0}
        for outcome in self.outcomes:
            counts[outcome["outcome"]] += 1
        return counts

    @property
    def all_basic(self) -> bool:
        return self.counts["basic"] == self.trials

    def summary(self) -> str:
        return f"{self.counts['basic']}/{self.trials} converged to psi*"


def uniqueness_probe(
    a: float,
    kappa: float,
    trials: int,
    cfg: SteadyResidualConfig,
    seed: Optional[int] = 0,
    radius_fraction: Tuple[float, float] = (0.1, 0.8),
    decay: float = 0.5,
    perturbations: Optional[Sequence[SpectralField]] = None,
    enforce_regime: bool = True,
    ball_radius: Optional[float] = None,
    dump_dir: Optional[Union[str, Path]] = None,
    config_hash: Optional[str] = None,
) -> ProbeReport:
    """
    Newton from random starts inside the ball ‖∇²(ψ - ψ*)‖ < κ²/4.

    In the regime κa >= 1 every start should return to ψ*. Any other
    outcome is recorded and, with ``dump_dir``, written out as field JSON
    stamped with ``config_hash``.
    """
    if enforce_regime and kappa * a < 1.0 - 1e-12:
        raise PreconditionError(f"uniqueness probe requires kappa*a >= 1, got {kappa * a}")
    if a != cfg.a:
        cfg = replace(cfg, a=float(a))
    radius = ball_radius if ball_radius is not None else kappa * kappa / 4.0
    basic = cfg.basic()

    if perturbations is None:
        rng = np.random.default_rng(seed)
        perturbations = []
        for _ in range(trials):
            h = random_even_perturbation(a, cfg.M, cfg.N, rng, decay)
            target = rng.uniform(*radius_fraction) * radius
            perturbations.append(h * (target / hessian_sup(h)))
    else:
        perturbations = list(perturbations)
        for index, h in enumerate(perturbations):
            size = hessian_sup(h)
            if size >= radius:
                raise PreconditionError(
                    f"perturbation {index} leaves the ball: {size:.4e} >= {radius:.4e}",
                    index=index,
                )

    outcomes: List[Dict[str, Any]] = []
    artifacts: List[str] = []
    for index, h in enumerate(perturbations):
        start = basic + h
        record: Dict[str, Any] = {"trial": index, "start_hessian": hessian_sup(h)}
        dump_field = None
        try:
            point = newton_solve(start, kappa, cfg)
            record.update(
                amplitude=point.amplitude,
                iterations=point.iterations,
                residual_norm=point.residual_norm,
            )
            if point.amplitude < BASIC_AMPLITUDE_TOL:
                record["outcome"] = "basic"
            else:
                record["outcome"] = "nontrivial"
                dump_field = point.field
        except NumericalFailure as e:
            record.update(outcome="diverged", error=str(e), error_type=type(e).__name__)
            dump_field = start
        PROBE_TRIALS_TOTAL.labels(outcome=record["outcome"]).inc()
        if dump_field is not None and dump_dir is not None:
            path = Path(dump_dir) / f"probe-{index:03d}-{record['outcome']}.json"
            dump_field.save(path, config_hash)
            artifacts.append(str(path))
        outcomes.append(record)

    report = ProbeReport(a=a, kappa=kappa, seed=seed, outcomes=outcomes, artifacts=artifacts)
    log_solver_event(
        logger, "probe", "complete", "success", kappa=kappa, summary=report.summary()
    )
    return report
