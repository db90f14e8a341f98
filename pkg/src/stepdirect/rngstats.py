"""Seedable random generation, truncated draws, and dense linear algebra.

Streams are derived from a (seed, stream) pair through ``SeedSequence`` so
that chains can run in parallel with reproducible, pairwise-independent
generators. All distribution draws validate their parameters and raise
:class:`~stepdirect.errors.DomainError` on violations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import (
    DomainError,
    InfeasibleTruncationError,
    NotPositiveDefiniteError,
)

__all__ = [
    "Rng",
    "SymMatrix",
    "SummaryRow",
    "sym_eigenvalues",
    "summarize",
]


class Rng:
    """Deterministic random stream identified by (seed, stream).

    Wraps a PCG64 generator seeded through ``SeedSequence(seed, (stream,))``;
    identical (seed, stream, call sequence) reproduces identical output.
    An instance is owned by a single chain/thread at a time.
    """

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or stream < 0:
            raise DomainError("seed and stream must be nonnegative")
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, stream={self.stream})"

    def spawn(self, stream: int) -> "Rng":
        """Independent stream with the same seed."""
        return Rng(self.seed, stream)

    # -- scalar / vector draws -------------------------------------------

    def uniform(self, a: float = 0.0, b: float = 1.0, size=None):
        if not a < b:
            raise DomainError(f"uniform requires a < b, got [{a}, {b})")
        return self.generator.uniform(a, b, size=size)

    def normal(self, mean: float = 0.0, sd: float = 1.0, size=None):
        if sd <= 0:
            raise DomainError("normal requires sd > 0")
        return self.generator.normal(mean, sd, size=size)

    def gamma(self, shape: float, rate: float, size=None):
        if shape <= 0 or rate <= 0:
            raise DomainError("gamma requires shape > 0 and rate > 0")
        return self.generator.gamma(shape, scale=1.0 / rate, size=size)

    def inverse_gamma(self, shape: float, rate: float, size=None):
        if shape <= 0 or np.any(np.asarray(rate) <= 0):
            raise DomainError("inverse_gamma requires shape > 0 and rate > 0")
        return np.asarray(rate) / self.generator.gamma(shape, scale=1.0, size=size)

    def inverse_gamma_trunc(self, shape: float, rate: float, hi: float) -> float:
        """IG(shape, rate) conditioned on the value being <= hi.

        Inverse-CDF draw on the restricted quantile range, so cost is flat
        regardless of how little mass the truncation keeps.
        """
        if shape <= 0 or rate <= 0 or hi <= 0:
            raise DomainError("inverse_gamma_trunc requires positive parameters")
        # CDF of IG(shape, rate) at hi is Q(shape, rate/hi).
        cdf_hi = 1.0 if np.isinf(hi) else float(special.gammaincc(shape, rate / hi))
        if cdf_hi == 0.0:
            raise InfeasibleTruncationError(
                f"IG({shape}, {rate}) has no representable mass below {hi}"
            )
        u = self.generator.uniform(0.0, cdf_hi)
        # Invert Q(shape, rate/x) = u.
        x = rate / special.gammainccinv(shape, u)
        return float(min(x, hi))

    def mvn_precision(self, precision: "SymMatrix | np.ndarray", linear) -> np.ndarray:
        """Draw from N(Omega^{-1} b, Omega^{-1}) given (Omega, b).

        Factorizes Omega once; the inverse is never formed explicitly.
        """
        omega = precision.values if isinstance(precision, SymMatrix) else np.asarray(precision, float)
        b = np.asarray(linear, dtype=float)
        try:
            lower = np.linalg.cholesky(omega)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("precision matrix is not positive definite") from exc
        # mean = Omega^{-1} b via two triangular solves.
        from scipy.linalg import solve_triangular

        half = solve_triangular(lower, b, lower=True)
        mean = solve_triangular(lower.T, half, lower=False)
        z = self.generator.standard_normal(b.shape[0])
        return mean + solve_triangular(lower.T, z, lower=False)


@dataclass(frozen=True)
class SymMatrix:
    """Dense symmetric matrix; symmetry is enforced at construction."""

    values: np.ndarray

    def __init__(self, values):
        m = np.asarray(values, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError("SymMatrix requires a square matrix")
        if not np.allclose(m, m.T, rtol=0.0, atol=1e-8 * max(1.0, np.abs(m).max())):
            raise DomainError("matrix is not symmetric")
        object.__setattr__(self, "values", 0.5 * (m + m.T))

    @property
    def dimension(self) -> int:
        return self.values.shape[0]


def sym_eigenvalues(m: SymMatrix | np.ndarray) -> np.ndarray:
    """All eigenvalues of a dense symmetric matrix, descending."""
    values = m.values if isinstance(m, SymMatrix) else SymMatrix(m).values
    eig = np.linalg.eigvalsh(values)
    return eig[::-1].copy()


@dataclass(frozen=True)
class SummaryRow:
    """Posterior-style summary of a draw sequence."""

    mean: float
    sd: float
    q025: float
    q975: float


def summarize(draws) -> SummaryRow:
    """Mean, sd (n-1 denominator), and 2.5%/97.5% type-7 quantiles."""
    x = np.asarray(draws, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("summarize requires a nonempty sequence")
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    q025, q975 = np.quantile(x, [0.025, 0.975], method="linear")
    return SummaryRow(mean=float(np.mean(x)), sd=sd, q025=float(q025), q975=float(q975))
