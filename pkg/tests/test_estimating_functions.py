import numpy as np
import pytest

from conf.SystemConfiguration import SystemConfig as Config
from model.estimand import Estimand
from model.estimating_functions import PhiA, PhiB
from model.nuisance_fit import NuisanceFit
from model.survey_data import CombinedData
from utils.tap_errors import ConfigError, DomainError, PropensityUnderflowError


def _data(rng, n_A=200, n_B=300):
    X_A = rng.normal(size=(n_A, 1))
    X_B = rng.normal(size=(n_B, 1))
    y_A = 1.0 + 2.0 * X_A[:, 0] + rng.normal(size=n_A)
    y_B = 1.0 + 2.0 * X_B[:, 0] + rng.normal(size=n_B)
    return CombinedData.from_arrays(X_A, y_A, rng.uniform(5.0, 15.0, size=n_A), X_B, y_B)


class TestEstimand:
    @staticmethod
    def test_kinds_and_dimension() -> None:
        assert Estimand(Estimand.MEAN).dimension(4) == 1
        assert Estimand(Estimand.REGRESSION_COEF).dimension(4) == 4
        with pytest.raises(ConfigError):
            Estimand("median")
        with pytest.raises(ConfigError):
            Estimand(Estimand.PROPORTION_BELOW)

    @staticmethod
    def test_proportion_response_is_strict() -> None:
        est = Estimand(Estimand.PROPORTION_BELOW, cutoff=2.0)
        np.testing.assert_array_equal(est.response([1.0, 2.0, 3.0]), [1.0, 0.0, 0.0])
        assert est.is_binary([5.0])

    @staticmethod
    def test_population_regression_value() -> None:
        X = np.column_stack([np.ones(4), [0.0, 1.0, 2.0, 3.0]])
        y = 1.0 + 2.0 * X[:, 1]
        np.testing.assert_allclose(Estimand(Estimand.REGRESSION_COEF).population_value(X, y), [1.0, 2.0])


class TestPhiA:
    @staticmethod
    def test_mean_root_is_hajek() -> None:
        rng = np.random.default_rng(42)
        data = _data(rng)
        mu = PhiA(Estimand(Estimand.MEAN)).solve(data.prob.X, data.prob.y, data.prob.d)
        expected = data.prob.d @ data.prob.y / data.prob.d.sum()
        assert mu[0] == pytest.approx(expected)

    @staticmethod
    def test_regression_root_zeroes_equation() -> None:
        rng = np.random.default_rng(42)
        data = _data(rng)
        phi = PhiA(Estimand(Estimand.REGRESSION_COEF))
        mu = phi.solve(data.prob.X, data.prob.y, data.prob.d)
        np.testing.assert_allclose(phi(data.prob.X, data.prob.y, data.prob.d, mu).sum(axis=0), 0.0, atol=1e-8)


class TestPhiB:
    @staticmethod
    def test_constant_propensity_and_zero_outcome_model() -> None:
        rng = np.random.default_rng(42)
        data = _data(rng)
        pi = 0.25
        phi = PhiB(Estimand(Estimand.MEAN), lambda X: np.full(X.shape[0], pi), lambda X: np.zeros(X.shape[0]))
        expected = data.nonprob.y.sum() / pi / data.N_hat
        assert phi.normalized_sum(data, np.zeros(1))[0] == pytest.approx(expected)
        assert phi.jacobian_mu(data)[0, 0] == -1.0

    @staticmethod
    def test_augmented_form() -> None:
        rng = np.random.default_rng(42)
        data = _data(rng)
        outcome = lambda X: 1.0 + 2.0 * X[:, 1]
        phi = PhiB(Estimand(Estimand.MEAN), lambda X: np.full(X.shape[0], 0.5), outcome)
        resid = data.nonprob.y - outcome(data.nonprob.X)
        expected = (resid.sum() / 0.5 + data.prob.d @ outcome(data.prob.X)) / data.N_hat - 3.0
        assert phi.normalized_sum(data, np.array([3.0]))[0] == pytest.approx(expected)

    @staticmethod
    def test_underflow_is_reported() -> None:
        rng = np.random.default_rng(42)
        data = _data(rng)
        phi = PhiB(Estimand(Estimand.MEAN), lambda X: np.full(X.shape[0], 1e-12), lambda X: np.zeros(X.shape[0]))
        with pytest.raises(PropensityUnderflowError):
            phi.normalized_sum(data, np.zeros(1))

    @staticmethod
    @pytest.mark.parametrize("kind", [Estimand.MEAN, Estimand.REGRESSION_COEF])
    def test_jacobian_tau_matches_finite_differences(kind) -> None:
        rng = np.random.default_rng(42)
        data = _data(rng)
        estimand = Estimand(kind)
        alpha, beta = np.array([-1.0, 0.2]), np.array([1.0, 2.0])
        mu = np.full(estimand.dimension(2), 0.5)

        def value(tau):
            fit = NuisanceFit(tau[:2], tau[2:], Config.DEFAULT_STRATEGY, True, 0)
            return PhiB.from_fit(estimand, fit).normalized_sum(data, mu)

        tau = np.concatenate([alpha, beta])
        h = 1e-6
        numeric = np.column_stack([(value(tau + h * e) - value(tau - h * e)) / (2 * h) for e in np.eye(4)])
        fit = NuisanceFit(alpha, beta, Config.DEFAULT_STRATEGY, True, 0)
        analytic = PhiB.from_fit(estimand, fit).jacobian_tau(data, mu)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-7)

    @staticmethod
    def test_jacobian_tau_needs_fit() -> None:
        rng = np.random.default_rng(42)
        data = _data(rng)
        phi = PhiB(Estimand(Estimand.MEAN), lambda X: np.full(X.shape[0], 0.5), lambda X: np.zeros(X.shape[0]))
        with pytest.raises(DomainError):
            phi.jacobian_tau(data, np.zeros(1))
