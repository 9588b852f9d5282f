import math

import numpy as np
import pytest
from scipy import stats

from utils.num_kernel import (
    NoncentralChiSq,
    SeedPlan,
    TruncRegion,
    chisq_cdf,
    chisq_quantile,
    nearest_psd,
    nelder_mead,
    noncentral_chisq_cdf,
    psd_inv_sqrt,
    psd_sqrt,
    sample_trunc_w2,
    trunc_moments,
)
from utils.tap_errors import (
    DegenerateRegionError,
    DomainError,
    FeasibilityError,
    IndefiniteMatrixError,
    SingularityError,
)


class TestChiSquare:
    @staticmethod
    def test_central_cdf_matches_scipy() -> None:
        for df in (1, 2, 5):
            for x in (0.1, 1.0, 3.84, 12.0):
                assert chisq_cdf(x, df) == pytest.approx(stats.chi2.cdf(x, df), abs=1e-14)

    @staticmethod
    def test_quantile_inverts_cdf() -> None:
        assert chisq_quantile(0.95, 1) == pytest.approx(3.841458820694124, abs=1e-9)
        assert chisq_quantile(0.95, 2) == pytest.approx(5.991464547107979, abs=1e-9)

    @staticmethod
    def test_invalid_arguments() -> None:
        with pytest.raises(DomainError):
            chisq_cdf(-1.0, 1)
        with pytest.raises(DomainError):
            chisq_cdf(1.0, 0)
        with pytest.raises(DomainError):
            noncentral_chisq_cdf(1.0, 1, -0.5)
        with pytest.raises(DomainError):
            chisq_quantile(1.0, 1)


class TestNoncentralChiSquare:
    @staticmethod
    def test_zero_noncentrality_reduces_to_central() -> None:
        assert noncentral_chisq_cdf(3.84, 1, 0.0) == pytest.approx(0.94996, abs=1e-4)

    @staticmethod
    def test_normal_reduction_df1() -> None:
        # chi2_1(mu) <= x  <=>  |Z + mu| <= sqrt(x)
        for mu in (0.5, 1.5, 3.0):
            delta = mu * mu / 2.0
            for x in (0.5, 3.84, 10.0):
                r = math.sqrt(x)
                expected = stats.norm.cdf(r - mu) - stats.norm.cdf(-r - mu)
                assert noncentral_chisq_cdf(x, 1, delta) == pytest.approx(expected, abs=1e-10)

    @staticmethod
    def test_matches_scipy_ncx2() -> None:
        # scipy usa nc = 2 * delta
        for df in (1, 2, 3, 4, 5):
            for delta in (0.125, 1.125, 5.0):
                for x in (1.0, 3.84, 9.0):
                    expected = stats.ncx2.cdf(x, df, 2.0 * delta)
                    assert noncentral_chisq_cdf(x, df, delta) == pytest.approx(expected, abs=1e-9)

    @staticmethod
    def test_monotone_in_noncentrality() -> None:
        values = [noncentral_chisq_cdf(3.84, 1, d) for d in (0.0, 0.5, 1.0, 2.0, 4.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    @staticmethod
    def test_extremes() -> None:
        law = NoncentralChiSq(2, 1.0)
        assert law.cdf(0.0) == 0.0
        assert law.cdf(np.inf) == 1.0
        assert law.sf(2.0) == pytest.approx(1.0 - law.cdf(2.0))

    @staticmethod
    def test_from_mean_uses_half_squared_norm() -> None:
        law = NoncentralChiSq.from_mean([1.0, 2.0])
        assert law.df == 2
        assert law.delta == pytest.approx(2.5)


class TestTruncatedMoments:
    @staticmethod
    def test_complementary_regions_add_up() -> None:
        mu2 = np.array([0.8])
        m_in, s_in, p_in = trunc_moments(mu2, TruncRegion(0.0, 3.84))
        m_out, s_out, p_out = trunc_moments(mu2, TruncRegion(3.84, np.inf))
        assert p_in + p_out == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(p_in * m_in + p_out * m_out, mu2, atol=1e-10)
        np.testing.assert_allclose(p_in * s_in + p_out * s_out, np.eye(1) + np.outer(mu2, mu2), atol=1e-10)

    @staticmethod
    def test_matches_rejection_sampling() -> None:
        rng = np.random.default_rng(42)
        for mu in (0.0, 0.5, 1.5):
            mu2 = np.array([mu])
            region = TruncRegion(0.0, 3.84)
            mean, second, _ = trunc_moments(mu2, region)
            draws = sample_trunc_w2(mu2, region, rng, 200000)
            se = draws[:, 0].std() / math.sqrt(draws.shape[0])
            assert abs(draws[:, 0].mean() - mean[0]) < 4 * se
            se2 = (draws[:, 0] ** 2).std() / math.sqrt(draws.shape[0])
            assert abs((draws[:, 0] ** 2).mean() - second[0, 0]) < 4 * se2

    @staticmethod
    def test_bivariate_symmetric_region() -> None:
        mean, second, mass = trunc_moments(np.zeros(2), TruncRegion(0.0, 5.99))
        np.testing.assert_allclose(mean, np.zeros(2), atol=1e-12)
        assert second[0, 1] == pytest.approx(0.0, abs=1e-12)
        assert mass == pytest.approx(0.95, abs=1e-3)

    @staticmethod
    def test_degenerate_region() -> None:
        with pytest.raises(DegenerateRegionError):
            trunc_moments(np.array([40.0]), TruncRegion(0.0, 0.01))
        with pytest.raises(FeasibilityError):
            sample_trunc_w2(np.array([40.0]), TruncRegion(0.0, 0.01), np.random.default_rng(0), 10)
        with pytest.raises(DomainError):
            TruncRegion(2.0, 1.0)


class TestMatrixUtilities:
    @staticmethod
    def test_sqrt_and_inverse_sqrt() -> None:
        M = np.array([[2.0, 0.5], [0.5, 1.0]])
        root = psd_sqrt(M)
        np.testing.assert_allclose(root @ root, M, atol=1e-12)
        inv_root = psd_inv_sqrt(M)
        np.testing.assert_allclose(inv_root @ M @ inv_root, np.eye(2), atol=1e-12)

    @staticmethod
    def test_rejects_indefinite_and_singular() -> None:
        with pytest.raises(IndefiniteMatrixError):
            psd_sqrt(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(SingularityError):
            psd_inv_sqrt(np.array([[1.0, 1.0], [1.0, 1.0]]))

    @staticmethod
    def test_nearest_psd_clamps() -> None:
        M, clamped = nearest_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert clamped
        assert np.linalg.eigvalsh(M).min() >= -1e-12
        same, clamped = nearest_psd(np.eye(2))
        assert not clamped
        np.testing.assert_array_equal(same, np.eye(2))


class TestNelderMead:
    @staticmethod
    def test_rosenbrock() -> None:
        def rosen(x):
            return (1.0 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2

        x, value = nelder_mead(rosen, [-1.2, 1.0], seed=1)
        np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-4)
        assert value < 1e-8

    @staticmethod
    def test_extra_starts_escape_local_minimum() -> None:
        def double_well(x):
            return (x[0] ** 2 - 1.0) ** 2 + 0.3 * x[0]

        result = nelder_mead(double_well, [1.0], starts=[[-1.0]], restarts=0)
        assert result.x[0] < 0
        assert result.n_starts == 2

    @staticmethod
    def test_non_finite_start() -> None:
        with pytest.raises(DomainError):
            nelder_mead(lambda x: np.nan, [0.0])


class TestSeedPlan:
    @staticmethod
    def test_streams_are_reproducible_and_distinct() -> None:
        plan = SeedPlan(123)
        a = plan.stream(5, 2).standard_normal(3)
        b = SeedPlan(123).stream(5, 2).standard_normal(3)
        c = plan.stream(6, 2).standard_normal(3)
        d = plan.stream(5, 3).standard_normal(3)
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)
        assert not np.allclose(a, d)
        assert plan.child_seed(1, 1) == SeedPlan(123).child_seed(1, 1)

    @staticmethod
    def test_rejects_negative_seed() -> None:
        with pytest.raises(DomainError):
            SeedPlan(-1)
