"""
Linearization of the steady equation about the basic flow ψ* = cos x2.

The linear operator in strong form

    L h = κΔh + sin x2 (Δ + 1) ∂1 h

maps each zonal column m to itself. In coefficient space it is a
tridiagonal matrix in n, applied here by exact index shifts:

    (L b)_n = -κ β_n b_n + (m a / 2) [(β_{n+1} - 1) b_{n+1} - (β_{n-1} - 1) b_{n-1}]

with β_n = m²a² + n². The m = 1 column carries the critical eigenfunction.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..errors import ParameterError
from ..logging_config import get_logger
from .critical_value import RecurrenceCoeffs, gamma_values, required_truncation, tail_limit
from .spectral_domain import SpectralField, as_aspect_ratio, wavenumber_squared

logger = get_logger(__name__)

DEFAULT_TAIL = 1024
KERNEL_UPPER = 1e-8
KERNEL_LOWER = 1e-12


@dataclass(frozen=True, eq=False)
class GammaSequence:
    """Ratios γ_n = (β_n - 1)b_n / ((β_{n-1} - 1)b_{n-1}) for 1 <= n <= N_tail."""

    a: float
    kappa: float
    gamma: np.ndarray

    @property
    def n_tail(self) -> int:
        return int(self.gamma.size)

    @property
    def limit(self) -> float:
        return tail_limit(self.a, self.kappa)

    @property
    def tail_error(self) -> float:
        return abs(float(self.gamma[-1]) - self.limit)

    def __getitem__(self, n: int) -> float:
        if not 1 <= n <= self.n_tail:
            raise IndexError(f"gamma index {n} outside 1..{self.n_tail}")
        return float(self.gamma[n - 1])


def gamma_sequence(
    a, kappa: float, N_tail: int = DEFAULT_TAIL, seed: Optional[float] = None
) -> GammaSequence:
    """Backward recursion for γ_n seeded beyond N_tail with the closed-form limit."""
    a = as_aspect_ratio(a).a
    gamma = gamma_values(RecurrenceCoeffs(a), kappa, N_tail, seed)
    gamma.setflags(write=False)
    return GammaSequence(a, float(kappa), gamma)


def recurrence_residual(column: np.ndarray, a: float, kappa: float) -> np.ndarray:
    """
    2κβ_n b_n - a(β_{n+1} - 1)b_{n+1} + a(β_{n-1} - 1)b_{n-1} for |n| <= N - 1.
    """
    N = (column.size - 1) // 2
    beta = a * a + np.arange(-N, N + 1, dtype=float) ** 2
    v = (beta - 1.0) * column
    return 2.0 * kappa * beta[1:-1] * column[1:-1] - a * v[2:] + a * v[:-2]


@dataclass(frozen=True, eq=False)
class Eigenfunction:
    """Critical eigenfunction supported on the m = 1 column."""

    field: SpectralField
    c: float
    kappa: float
    gammas: GammaSequence

    @property
    def column(self) -> np.ndarray:
        return self.field.coeffs[1].copy()

    def recurrence_residual(self) -> float:
        res = recurrence_residual(self.field.coeffs[1], self.field.a, self.kappa)
        return float(np.max(np.abs(res)))

    def tangent(self, M: int, N: int) -> SpectralField:
        """Unit-norm copy resized to the truncation (M, N)."""
        field = self.field.resized(M, N)
        return field * (1.0 / field.norm())

    def table(self) -> List[Tuple[int, float, Optional[float]]]:
        """Rows (n, b_n, γ_n) for -N <= n <= N; γ_{-n} = -γ_n and γ_0 is undefined."""
        N = self.field.N
        rows = []
        for n in range(-N, N + 1):
            b = float(self.field.coeffs[1, n + N])
            g: Optional[float] = None
            if n > 0:
                g = self.gammas[n]
            elif n < 0:
                g = -self.gammas[-n]
            rows.append((n, b, g))
        return rows


def build_eigenfunction(
    a, kappa_a: float, c: float = 1.0, N: int = 32, M: int = 1
) -> Eigenfunction:
    """
    Coefficients b_0 = c, b_n = c (a² - 1)/(β_n - 1) γ_1⋯γ_n and
    b_{-n} = (-1)^n b_n in the m = 1 column.
    """
    a = as_aspect_ratio(a).require_bifurcation_range().a
    if N < 1 or M < 1:
        raise ParameterError(f"eigenfunction needs M >= 1 and N >= 1, got ({M}, {N})")
    gammas = gamma_sequence(a, kappa_a, max(DEFAULT_TAIL, N))
    n = np.arange(1, N + 1, dtype=float)
    beta = a * a + n * n
    positive = c * (a * a - 1.0) / (beta - 1.0) * np.cumprod(gammas.gamma[:N])
    coeffs = np.zeros((M + 1, 2 * N + 1))
    coeffs[1, N] = c
    coeffs[1, N + 1 :] = positive
    coeffs[1, :N] = (((-1.0) ** n) * positive)[::-1]
    field = SpectralField(a, coeffs)
    logger.debug(
        "Eigenfunction built",
        extra={"a": a, "kappa": kappa_a, "N": N, "tail_coefficient": float(positive[-1])},
    )
    return Eigenfunction(field, float(c), float(kappa_a), gammas)


def apply_L_strong(f: SpectralField, kappa: float) -> SpectralField:
    """Coefficients of κΔf + sin x2 (Δ + 1) ∂1 f by index shifts."""
    beta = wavenumber_squared(f.a, f.M, f.N)
    b = f.coeffs
    v = (beta - 1.0) * b
    above = np.zeros_like(v)
    below = np.zeros_like(v)
    above[:, :-1] = v[:, 1:]
    below[:, 1:] = v[:, :-1]
    m = np.arange(f.M + 1)[:, None]
    out = -kappa * beta * b + 0.5 * m * f.a * (above - below)
    return SpectralField(f.a, out)


def column_indices(m: int, N: int) -> np.ndarray:
    return np.arange(1, N + 1) if m == 0 else np.arange(-N, N + 1)


def column_block(a: float, kappa: float, m: int, N: int) -> np.ndarray:
    """Dense matrix of L restricted to zonal column m."""
    n = column_indices(m, N).astype(float)
    beta = (m * a) ** 2 + n * n
    size = n.size
    block = np.diag(-kappa * beta)
    if m > 0:
        idx = np.arange(size - 1)
        block[idx, idx + 1] = 0.5 * m * a * (beta[1:] - 1.0)
        block[idx + 1, idx] = -0.5 * m * a * (beta[:-1] - 1.0)
    return block


def preconditioned_block(a: float, kappa: float, m: int, N: int) -> np.ndarray:
    """diag(1/β_n)·L_m: same kernel as L_m, norm independent of N."""
    n = column_indices(m, N).astype(float)
    beta = (m * a) ** 2 + n * n
    return column_block(a, kappa, m, N) / beta[:, None]


@dataclass(frozen=True)
class KernelCheckResult:
    m: int
    kappa: float
    N: int
    dimension: Optional[int]
    inconclusive: bool
    smallest_singular_value: float
    block_norm: float
    quadratic_form: float
    rank: int
    rank_squared: int

    @property
    def relative_singular_value(self) -> float:
        return self.smallest_singular_value / self.block_norm


def kernel_check_m(
    a,
    kappa: float,
    m: int,
    N: Optional[int] = None,
    upper: float = KERNEL_UPPER,
    lower: float = KERNEL_LOWER,
) -> KernelCheckResult:
    """
    Numerical kernel dimension of the zonal block m.

    σ_min above ``upper``·‖J‖ reports a trivial kernel, below ``lower``·‖J‖
    counts null directions, and anything in between is inconclusive. The
    quadratic form Σβ(β - 1)b² is evaluated on the weakest singular vector;
    it is positive for m >= 2 in the theorem range.
    """
    a = as_aspect_ratio(a).a
    if m < 0:
        raise ParameterError(f"zonal index must be >= 0, got {m}")
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if N is None:
        N = max(32, required_truncation(a, kappa)) if a < 1.0 else 32

    J = preconditioned_block(a, kappa, m, N)
    _, s, vt = np.linalg.svd(J)
    norm = float(s[0])
    smallest = float(s[-1])
    rank_tol = np.sqrt(upper * lower)
    rank = int(np.linalg.matrix_rank(J, tol=rank_tol * norm))
    rank_squared = int(np.linalg.matrix_rank(J @ J, tol=rank_tol * norm**2))

    n = column_indices(m, N).astype(float)
    beta = (m * a) ** 2 + n * n
    weakest = vt[-1]
    quadratic_form = float(np.sum(beta * (beta - 1.0) * weakest**2))

    dimension: Optional[int]
    inconclusive = False
    if smallest > upper * norm:
        dimension = 0
    elif smallest < lower * norm:
        dimension = int(np.sum(s < lower * norm))
    else:
        dimension = None
        inconclusive = True
        logger.warning(
            "Kernel check inconclusive",
            extra={"m": m, "kappa": kappa, "N": N, "relative_sv": smallest / norm},
        )

    return KernelCheckResult(
        m=m,
        kappa=float(kappa),
        N=N,
        dimension=dimension,
        inconclusive=inconclusive,
        smallest_singular_value=smallest,
        block_norm=norm,
        quadratic_form=quadratic_form,
        rank=rank,
        rank_squared=rank_squared,
    )


def simplicity_check(a, kappa_a: float, N: Optional[int] = None) -> List[KernelCheckResult]:
    """m = 1 kernel checks at N and N + 8; simple iff every entry has
    dimension 1 and rank(J²) = rank(J)."""
    a = as_aspect_ratio(a).a
    if N is None:
        N = max(32, required_truncation(a, kappa_a))
    return [kernel_check_m(a, kappa_a, 1, size) for size in (N, N + 8)]
