from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from stepdirect.errors import (
    DomainError,
    InfeasibleTruncationError,
    NotPositiveDefiniteError,
)
from stepdirect.rngstats import Rng, SymMatrix, summarize, sym_eigenvalues


class TestRng:
    def test_reproducible(self):
        a = Rng(42, 3).generator.uniform(size=5)
        b = Rng(42, 3).generator.uniform(size=5)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = Rng(42, 0).generator.uniform(size=5)
        b = Rng(42, 1).generator.uniform(size=5)
        assert not np.array_equal(a, b)

    def test_spawn(self):
        rng = Rng(7, 0)
        assert np.array_equal(
            rng.spawn(4).generator.uniform(size=3), Rng(7, 4).generator.uniform(size=3)
        )

    def test_negative_seed_rejected(self):
        with pytest.raises(DomainError):
            Rng(-1)

    def test_parameter_validation(self):
        rng = Rng(0)
        with pytest.raises(DomainError):
            rng.uniform(1.0, 0.0)
        with pytest.raises(DomainError):
            rng.normal(sd=0.0)
        with pytest.raises(DomainError):
            rng.gamma(0.0, 1.0)
        with pytest.raises(DomainError):
            rng.inverse_gamma(1.0, -1.0)

    def test_gamma_rate_convention(self):
        draws = Rng(1).gamma(4.0, 2.0, size=200_000)
        assert np.mean(draws) == pytest.approx(2.0, rel=0.02)

    def test_inverse_gamma_mean(self):
        draws = Rng(2).inverse_gamma(5.0, 8.0, size=200_000)
        assert np.mean(draws) == pytest.approx(8.0 / 4.0, rel=0.02)


class TestInverseGammaTrunc:
    def test_respects_bound(self):
        rng = Rng(3)
        draws = [rng.inverse_gamma_trunc(2.0, 1.0, 0.8) for _ in range(500)]
        assert max(draws) <= 0.8

    def test_loose_bound_matches_untruncated(self):
        rng = Rng(4)
        draws = np.array([rng.inverse_gamma_trunc(3.0, 2.0, 1e6) for _ in range(20_000)])
        ref = stats.invgamma(3.0, scale=2.0)
        ks = stats.kstest(draws, ref.cdf)
        assert ks.pvalue > 0.01

    def test_truncated_law_matches_conditional(self):
        rng = Rng(5)
        hi = 0.5
        draws = np.array([rng.inverse_gamma_trunc(3.0, 2.0, hi) for _ in range(20_000)])
        ref = stats.invgamma(3.0, scale=2.0)
        ks = stats.kstest(draws, lambda x: ref.cdf(x) / ref.cdf(hi))
        assert ks.pvalue > 0.01

    def test_infeasible_raises(self):
        with pytest.raises(InfeasibleTruncationError):
            Rng(0).inverse_gamma_trunc(2.0, 1.0, 1e-300)


class TestMvnPrecision:
    def test_mean_and_covariance(self):
        omega = np.array([[2.0, 0.5], [0.5, 1.0]])
        b = np.array([1.0, -1.0])
        rng = Rng(6)
        draws = np.array([rng.mvn_precision(omega, b) for _ in range(50_000)])
        cov = np.linalg.inv(omega)
        assert np.allclose(draws.mean(axis=0), cov @ b, atol=0.02)
        assert np.allclose(np.cov(draws.T), cov, atol=0.02)

    def test_accepts_sym_matrix(self):
        out = Rng(0).mvn_precision(SymMatrix(np.eye(3)), np.zeros(3))
        assert out.shape == (3,)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefiniteError):
            Rng(0).mvn_precision(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2))


class TestSymMatrix:
    def test_rejects_asymmetric(self):
        with pytest.raises(DomainError):
            SymMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_nonsquare(self):
        with pytest.raises(DomainError):
            SymMatrix(np.ones((2, 3)))

    def test_eigenvalues_descending(self):
        eig = sym_eigenvalues(np.diag([3.0, -1.0, 2.0]))
        assert np.array_equal(eig, [3.0, 2.0, -1.0])


class TestSummarize:
    def test_known_values(self):
        s = summarize([1.0, 2.0, 3.0, 4.0])
        assert s.mean == 2.5
        assert s.sd == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
        assert s.q025 < s.q975

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            summarize([])
