"""
Critical Ekman number κ_a of the basic shear flow cos x2.

Two independent formulations are kept side by side:

- the Stieltjes continued fraction P(κ) = 1/(κ²d1 + 1/(d2 + 1/(κ²d3 + ...)))
  whose root P(κ_a) = a/(1 - a²) is found by bisection, and
- a truncated generalized eigenproblem A b = κ B b assembled from the
  three-term recurrence of the m = 1 Fourier column.

The tail ratios γ_n of the recurrence are also computed here since
P(κ) = -γ1(κ)/κ gives a third route used as a fallback.
"""

import math
import multiprocessing
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize

from ..errors import OracleFailure, ParameterError, SingularRecursionError, SolverFailure
from ..logging_config import get_logger, log_solver_event
from ..metrics import CRITICAL_VALUE_SOLVES_TOTAL
from .spectral_domain import as_aspect_ratio

logger = get_logger(__name__)

_EPS = np.finfo(float).eps
MIN_ORACLE_TRUNCATION = 32
MAX_ORACLE_TRUNCATION = 2048
START_DEPTH = 8


@lru_cache(maxsize=256)
def _d_values(a: float, depth: int) -> np.ndarray:
    n = np.arange(1, depth + 1, dtype=float)
    beta = a * a + n * n
    d = 2.0 * beta / (a * (beta - 1.0))
    d.setflags(write=False)
    return d


@dataclass(frozen=True)
class RecurrenceCoeffs:
    """β_n = a² + n² and d_n = 2β_n/(a(β_n - 1)) for the m = 1 column."""

    a: float

    def __post_init__(self):
        as_aspect_ratio(self.a)

    def beta(self, n):
        return self.a * self.a + np.asarray(n, dtype=float) ** 2

    def d(self, n):
        beta = self.beta(n)
        return 2.0 * beta / (self.a * (beta - 1.0))

    @property
    def d0(self) -> float:
        return float(self.d(0))

    def d_values(self, depth: int) -> np.ndarray:
        """d_1 ... d_depth."""
        return _d_values(self.a, int(depth))


def bound_rhs(a) -> float:
    """Upper bound a·sqrt((1 - a²)/(2(1 + a²))) for κ_a."""
    a = as_aspect_ratio(a).a
    if not 0.0 < a < 1.0:
        raise ParameterError(f"a must lie in (0,1), got {a}", a=a)
    return a * math.sqrt((1.0 - a * a) / (2.0 * (1.0 + a * a)))


def target_value(a: float) -> float:
    return a / (1.0 - a * a)


def tail_limit(a: float, kappa: float) -> float:
    """lim γ_n = κ/a - sqrt(κ²/a² + 1)."""
    r = kappa / a
    return r - math.sqrt(r * r + 1.0)


def stieltjes_P(kappa: float, coeffs: RecurrenceCoeffs, depth: int) -> float:
    """Finite truncation of the continued fraction at ``depth`` levels."""
    if depth < 2:
        raise ParameterError(f"continued fraction depth must be >= 2, got {depth}")
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    levels = np.array(coeffs.d_values(depth))
    levels[0::2] *= kappa * kappa
    value = levels[-1]
    for t in levels[-2::-1]:
        value = t + 1.0 / value
    return float(1.0 / value)


def converged_P(
    kappa: float, coeffs: RecurrenceCoeffs, tol: float, max_depth: int = 65536
) -> Tuple[float, int]:
    """
    P(κ) with depth doubled until successive truncations agree.

    Successive truncations bracket the limit, so |P_d - P_{d+1}| bounds the
    error. The depth keeps doubling towards machine precision and settles
    for tol/10 only at ``max_depth``.
    """
    depth = START_DEPTH
    while True:
        p = stieltjes_P(kappa, coeffs, depth)
        q = stieltjes_P(kappa, coeffs, depth + 1)
        gap = abs(p - q)
        if gap <= min(tol / 10.0, 64.0 * _EPS * abs(q)):
            return 0.5 * (p + q), depth
        if depth >= max_depth:
            if gap < tol / 10.0:
                return 0.5 * (p + q), depth
            raise SolverFailure(
                f"continued fraction did not converge at kappa={kappa} "
                f"within depth {max_depth}",
                kappa=kappa,
                gap=gap,
            )
        depth *= 2


def gamma_values(
    coeffs: RecurrenceCoeffs,
    kappa: float,
    n_tail: int,
    seed: Optional[float] = None,
) -> np.ndarray:
    """
    γ_1 ... γ_{n_tail} by the backward recursion γ_n = -1/(κd_n - γ_{n+1}).

    γ_{n_tail+1} is seeded with ``seed`` (default: the closed-form limit).
    """
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if n_tail < 1:
        raise ParameterError(f"n_tail must be >= 1, got {n_tail}")
    d = coeffs.d_values(n_tail)
    following = tail_limit(coeffs.a, kappa) if seed is None else float(seed)
    gamma = np.empty(n_tail)
    for n in range(n_tail, 0, -1):
        denominator = kappa * d[n - 1] - following
        if abs(denominator) < 1e-14:
            raise SingularRecursionError(
                f"vanishing denominator in gamma recursion at n={n}",
                n=n,
                kappa=kappa,
            )
        following = -1.0 / denominator
        gamma[n - 1] = following
    return gamma


def P_from_gamma(kappa: float, coeffs: RecurrenceCoeffs, n_tail: int = 1024) -> float:
    return float(-gamma_values(coeffs, kappa, n_tail)[0] / kappa)


def required_truncation(a: float, kappa: float, tol: float = 1e-14, margin: int = 8) -> int:
    """Truncation N with |γ_∞|^{2N} below ``tol``."""
    decay = abs(tail_limit(a, kappa))
    return int(math.ceil(math.log(tol) / (2.0 * math.log(decay)))) + margin


def _oracle_matrices(a: float, N: int) -> Tuple[np.ndarray, np.ndarray]:
    n = np.arange(-N, N + 1, dtype=float)
    beta = a * a + n * n
    A = np.zeros((2 * N + 1, 2 * N + 1))
    idx = np.arange(2 * N)
    A[idx, idx + 1] = a * (beta[1:] - 1.0)
    A[idx + 1, idx] = -a * (beta[:-1] - 1.0)
    return A, np.diag(2.0 * beta)


def parity_defect(vector: np.ndarray) -> float:
    """‖b_{-n} - (-1)^n b_n‖ / ‖b‖ for a vector indexed n = -N..N."""
    N = (vector.size - 1) // 2
    sign = (-1.0) ** np.abs(np.arange(-N, N + 1))
    mirrored = sign * vector[::-1]
    return float(np.linalg.norm(mirrored - vector) / np.linalg.norm(vector))


def oracle_eigenpair(a, N_trunc: int) -> Tuple[float, np.ndarray]:
    """
    Positive real eigenvalue of A b = κ B b with an even-parity eigenvector.

    The eigenvector is returned real and scaled so that b_0 = 1.
    """
    a = as_aspect_ratio(a).a
    if N_trunc < 8:
        raise ParameterError(f"oracle truncation must be >= 8, got {N_trunc}")
    A, B = _oracle_matrices(a, N_trunc)
    # B is diagonal and positive, so the pencil reduces to B^{-1}A
    values, vectors = linalg.eig(A / np.diag(B)[:, None])
    finite = np.isfinite(values)
    real = np.abs(values.imag) <= 1e-8 * np.maximum(1.0, np.abs(values))
    positive = values.real > 1e-6
    candidates = np.nonzero(finite & real & positive)[0]

    best: Optional[Tuple[float, int]] = None
    for k in candidates:
        v = vectors[:, k]
        v = v / v[np.argmax(np.abs(v))]
        defect = parity_defect(v.real) + float(np.linalg.norm(v.imag))
        if best is None or defect < best[0]:
            best = (defect, k)

    if best is None or best[0] > 1e-6:
        summary = sorted(values[finite], key=lambda z: -abs(z.real))[:6]
        raise OracleFailure(
            f"no positive real even-parity eigenvalue for a={a}, N={N_trunc}",
            spectrum=[complex(z) for z in summary],
        )
    k = best[1]
    vector = vectors[:, k].real.copy()
    vector /= vector[N_trunc]
    return float(values[k].real), vector


def matrix_oracle(a, N_trunc: Optional[int] = None, tol: float = 1e-14) -> float:
    """
    κ_a from the truncated eigenproblem.

    With ``N_trunc`` omitted the truncation is chosen from the decay rate of
    the eigenvector tail so that the truncation error is below ``tol``.
    """
    return oracle_with_truncation(a, N_trunc, tol)[0]


def oracle_with_truncation(
    a,
    N_trunc: Optional[int] = None,
    tol: float = 1e-14,
    kappa_hint: Optional[float] = None,
) -> Tuple[float, int]:
    """
    Oracle κ and the truncation it was taken at.

    Without ``N_trunc`` the first truncation comes from the tail decay at
    ``kappa_hint`` (when given) and is doubled while no even-parity
    eigenvalue is found, up to MAX_ORACLE_TRUNCATION.
    """
    if N_trunc is not None:
        return oracle_eigenpair(a, N_trunc)[0], N_trunc
    a = as_aspect_ratio(a).a
    N = MIN_ORACLE_TRUNCATION
    if kappa_hint is not None:
        N = min(max(N, required_truncation(a, kappa_hint, tol)), MAX_ORACLE_TRUNCATION)
    while True:
        try:
            kappa, _ = oracle_eigenpair(a, N)
            break
        except OracleFailure:
            if N >= MAX_ORACLE_TRUNCATION:
                raise
            logger.debug("Oracle truncation too small, doubling", extra={"a": a, "N_trunc": N})
            N = min(2 * N, MAX_ORACLE_TRUNCATION)
    needed = min(max(N, required_truncation(a, kappa, tol)), MAX_ORACLE_TRUNCATION)
    if needed > N:
        kappa, _ = oracle_eigenpair(a, needed)
    logger.debug(
        "Matrix oracle evaluated", extra={"a": a, "N_trunc": needed, "kappa": kappa}
    )
    return kappa, needed


@dataclass(frozen=True)
class CriticalValueResult:
    a: float
    kappa_a: float
    cf_depth: int
    oracle_kappa: float
    bound: float
    residual: float
    formulation: str = "continued_fraction"
    oracle_truncation: int = 0
    in_theorem_range: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _bracket(f, lo: float, hi: float, expansions: int = 60) -> Tuple[float, float]:
    for _ in range(expansions):
        if f(lo) > 0:
            break
        lo *= 0.5
    else:
        raise SolverFailure("no sign change below the bound", lo=lo, hi=hi)
    for _ in range(expansions):
        if f(hi) < 0:
            break
        hi *= 2.0
    else:
        raise SolverFailure("no sign change above the bound", lo=lo, hi=hi)
    return lo, hi


def solve_kappa_a(
    a,
    tol: float = 1e-10,
    max_depth: int = 65536,
    oracle_tol: float = 1e-8,
    check_oracle: bool = True,
) -> CriticalValueResult:
    """
    Root of P(κ) = a/(1 - a²).

    P is strictly decreasing, so bisection on [bound/2, bound] (halved or
    doubled until the sign changes) is unconditionally safe. The root is
    cross-checked against the matrix oracle; on disagreement the γ
    recursion is used instead and the result records it.
    """
    ar = as_aspect_ratio(a).require_bifurcation_range()
    a = ar.a
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    coeffs = RecurrenceCoeffs(a)
    target = target_value(a)
    bound = bound_rhs(a)

    def cf_residual(kappa: float) -> float:
        return converged_P(kappa, coeffs, tol, max_depth)[0] - target

    def gamma_residual(kappa: float) -> float:
        n_tail = max(1024, required_truncation(a, kappa, 1e-16))
        return P_from_gamma(kappa, coeffs, n_tail) - target

    formulation = "continued_fraction"
    residual_fn = cf_residual
    lo, hi = _bracket(residual_fn, 0.5 * bound, bound)
    kappa = optimize.bisect(residual_fn, lo, hi, xtol=1e-300, maxiter=400)

    oracle_kappa, oracle_n = (float("nan"), 0)
    if check_oracle:
        oracle_kappa, oracle_n = oracle_with_truncation(a, kappa_hint=kappa)
        if abs(kappa - oracle_kappa) >= oracle_tol:
            logger.warning(
                "Continued fraction disagrees with matrix oracle; "
                "falling back to gamma recursion",
                extra={"a": a, "cf_kappa": kappa, "oracle_kappa": oracle_kappa},
            )
            formulation = "gamma_recursion"
            residual_fn = gamma_residual
            lo, hi = _bracket(residual_fn, 0.5 * bound, bound)
            kappa = optimize.bisect(residual_fn, lo, hi, xtol=1e-300, maxiter=400)
            if abs(kappa - oracle_kappa) >= oracle_tol:
                raise OracleFailure(
                    "critical value formulations disagree",
                    kappa=kappa,
                    oracle_kappa=oracle_kappa,
                )

    value, depth = converged_P(kappa, coeffs, tol, max_depth)
    if formulation == "continued_fraction":
        residual = abs(value - target)
    else:
        residual = abs(residual_fn(kappa))
    result = CriticalValueResult(
        a=a,
        kappa_a=float(kappa),
        cf_depth=depth,
        oracle_kappa=oracle_kappa,
        bound=bound,
        residual=residual,
        formulation=formulation,
        oracle_truncation=oracle_n,
        in_theorem_range=ar.in_theorem_range,
    )
    CRITICAL_VALUE_SOLVES_TOTAL.labels(formulation=formulation).inc()
    log_solver_event(
        logger,
        "critical_value",
        "complete",
        "success",
        a=a,
        kappa_a=result.kappa_a,
        oracle_kappa=oracle_kappa,
        cf_depth=depth,
    )
    return result


def _solve_task(args: Tuple[float, float]) -> CriticalValueResult:
    a, tol = args
    return solve_kappa_a(a, tol=tol)


def kappa_a_curve(
    a_values: Sequence[float], tol: float = 1e-10, workers: int = 1
) -> List[CriticalValueResult]:
    """
    κ_a over a list of aspect ratios, in input order.

    With ``workers`` > 1 the solves fan out over a process pool; results are
    gathered by ``Pool.map`` which preserves order.
    """
    tasks = [(float(a), tol) for a in a_values]
    if workers <= 1 or len(tasks) <= 1:
        return [_solve_task(t) for t in tasks]

    logger.debug("Spawning sweep workers", extra={"workers": workers, "tasks": len(tasks)})
    with multiprocessing.Pool(processes=workers) as pool:
        return pool.map(_solve_task, tasks)


def parse_sweep(text: str) -> np.ndarray:
    """Parse ``a0:a1:steps`` into an inclusive linspace."""
    try:
        start, stop, steps = text.split(":")
        values = np.linspace(float(start), float(stop), int(steps))
    except ValueError as e:
        raise ParameterError(f"sweep must look like a0:a1:steps, got '{text}'") from e
    if int(steps) < 1:
        raise ParameterError("sweep needs at least one step")
    return values
