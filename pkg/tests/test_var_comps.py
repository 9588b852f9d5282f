import numpy as np
import pytest

from model.var_comps import VarComps, pool_weights
from utils.tap_errors import CauchySchwarzError, DimensionMismatchError


class TestPoolWeights:
    @staticmethod
    def test_weights_sum_to_identity() -> None:
        jac_A = np.array([[-2.0, 0.3], [0.1, -1.5]])
        jac_B = np.array([[-1.0, 0.2], [0.0, -1.2]])
        for Lambda in (0.0, 0.5, 3.0, np.diag([1.0, 2.0])):
            omega_A, omega_B = pool_weights(Lambda, jac_A, jac_B)
            np.testing.assert_allclose(omega_A + omega_B, np.eye(2), atol=1e-12)

    @staticmethod
    def test_scalar_mean_weights() -> None:
        omega_A, omega_B = pool_weights(3.0, [[-1.0]], [[-1.0]])
        assert omega_B[0, 0] == pytest.approx(0.75)
        assert omega_A[0, 0] == pytest.approx(0.25)


class TestToyVarComps:
    @staticmethod
    def test_derived_quantities(toy_varcomps) -> None:
        vc = toy_varcomps
        assert vc.Sigma_T[0, 0] == pytest.approx(1.0 * (2.0 + 1.0 - 2 * 0.5))
        assert vc.V_eff[0, 0] == pytest.approx(0.875)
        assert vc.Lambda_eff[0, 0] == pytest.approx(3.0)
        assert vc.Sigma_S[0, 0] == pytest.approx(14.0 / 9.0)
        assert vc.V_Aeff[0, 0] + vc.V_eff[0, 0] == pytest.approx(2.0)

    @staticmethod
    def test_veff_two_forms_agree(toy_varcomps) -> None:
        vc = toy_varcomps
        V_A, V_B, G = 2.0, 1.0, 0.5
        other = (V_A * V_B - G ** 2) / (V_A + V_B - 2 * G)
        assert vc.V_eff[0, 0] == pytest.approx(other, abs=1e-12)

    @staticmethod
    def test_optimal_lambda_attains_veff(toy_varcomps) -> None:
        vc = toy_varcomps
        assert vc.pooled_variance(vc.Lambda_eff)[0, 0] == pytest.approx(vc.V_eff[0, 0], abs=1e-12)
        assert vc.pooled_variance(0.0)[0, 0] == pytest.approx(2.0)

    @staticmethod
    def test_loadings_reproduce_covariances(toy_varcomps) -> None:
        # Cov(mu_A, W2) = L_A, Cov(mu_B, W2) = -L_B, V_A = V_eff + L_A L_A^T
        vc = toy_varcomps
        L_A, L_B = vc.loadings()
        np.testing.assert_allclose(vc.V_eff + L_A @ L_A.T, vc.V_A, atol=1e-12)

    @staticmethod
    def test_dict_round_trip(toy_varcomps) -> None:
        again = VarComps.from_dict(toy_varcomps.to_dict())
        np.testing.assert_allclose(again.Sigma_T, toy_varcomps.Sigma_T)


class TestVarCompsValidation:
    @staticmethod
    def test_cauchy_schwarz_guard() -> None:
        with pytest.raises(CauchySchwarzError):
            VarComps([[1.0]], [[1.0]], [[2.0]], [[-1.0]], [[-1.0]], 0.5)

    @staticmethod
    def test_shape_mismatch() -> None:
        with pytest.raises(DimensionMismatchError):
            VarComps(np.eye(2), np.eye(1), np.eye(2), np.eye(2), np.eye(2), 0.5)
