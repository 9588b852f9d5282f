"""
Stimatore test-and-pool: statistica del pretest, superficie analitica di
distorsione/MSE sotto alternative locali, tuning di (Lambda, c_gamma) e
pipeline completa.

Rappresentazione limite usata ovunque: con W2 ~ N(mu2, I) indipendente dalla
parte regolare R ~ N(-L_A mu2, V_eff),
    n^1/2 (mu_tap - mu) = R + [M_pool 1{|W2|^2 < c} + L_A 1{|W2|^2 >= c}] W2
con M_pool = omega_A L_A - omega_B L_B.
"""
import logging
import math

import numpy as np

from conf.SystemConfiguration import SystemConfig as Config
from model.estimating_functions import PhiB
from model.estimation_logic import EstimationLogic, PointEstimates
from model.nuisance_fit import NuisanceLogic
from model.tap_estimate import Hypotheses, LocalMeans, TapEstimate, TapOptions, TuningParams
from model.var_comps import pool_weights
from utils.num_kernel import (
    NoncentralChiSq,
    TruncRegion,
    chisq_quantile,
    nelder_mead,
    psd_inv_sqrt,
    psd_sqrt,
    sample_trunc_w2,
)
from utils.tap_errors import DomainError, SingularityError, StageError, TapError

logger = logging.getLogger(__name__)


class MseSurface:
    """Superficie (Lambda, c_gamma) -> (bias, mse) per eta e componenti di varianza fissati."""

    def __init__(self, eta, varcomps):
        self.vc = varcomps
        self.eta = np.atleast_1d(np.asarray(eta, dtype=float))
        if self.eta.size != varcomps.l:
            raise DomainError(f"eta ha dimensione {self.eta.size}, attesa {varcomps.l}")
        self.L_A, self.L_B = varcomps.loadings()
        self.mu2 = -psd_inv_sqrt(varcomps.Sigma_T) @ self.eta
        self.m_R = -self.L_A @ self.mu2
        self.delta = float(self.mu2 @ self.mu2) / 2.0

    def _cdfs(self, c):
        l = self.vc.l
        return [NoncentralChiSq(df, self.delta).cdf(c) for df in (l, l + 2, l + 4)]

    def branch_moments(self, c):
        """Momenti non normalizzati (massa, E[W 1], E[W W^T 1]) per pooling e rifiuto."""
        l = self.vc.l
        F_l, F_l2, F_l4 = self._cdfs(c)
        outer = np.outer(self.mu2, self.mu2)
        eye = np.eye(l)
        pool = (F_l, self.mu2 * F_l2, eye * F_l2 + outer * F_l4)
        reject = (1.0 - F_l, self.mu2 * (1.0 - F_l2), eye * (1.0 - F_l2) + outer * (1.0 - F_l4))
        return pool, reject

    def pool_loading(self, Lambda):
        omega_A, omega_B = pool_weights(Lambda, self.vc.jac_A, self.vc.jac_B)
        return omega_A @ self.L_A - omega_B @ self.L_B

    def _terms(self, Lambda, c):
        pool, reject = self.branch_moments(c)
        return [(self.pool_loading(Lambda), pool), (self.L_A, reject)]

    def evaluate(self, Lambda, c_gamma):
        if c_gamma <= 0:
            # mai pooling: lo stimatore e' mu_A
            return np.zeros(self.vc.l), self.vc.V_A.copy()
        bias = self.m_R.copy()
        mse = self.vc.V_eff + np.outer(self.m_R, self.m_R)
        for B, (_, e, S) in self._terms(Lambda, c_gamma):
            Be = B @ e
            bias = bias + Be
            mse = mse + B @ S @ B.T + np.outer(self.m_R, Be) + np.outer(Be, self.m_R)
        return bias, (mse + mse.T) / 2.0

    def decomposition(self, Lambda, c_gamma):
        """
        mse = xi * mse_pool + (1 - xi) * mse_reject, con i momenti condizionati
        di ciascun ramo (None se la massa del ramo e' trascurabile).
        """
        base = self.vc.V_eff + np.outer(self.m_R, self.m_R)
        parts = []
        for B, (p, e, S) in self._terms(Lambda, c_gamma):
            if p <= Config.TRUNC_MASS_MIN:
                parts.append(None)
                continue
            Be = B @ e
            parts.append(base + (B @ S @ B.T + np.outer(self.m_R, Be) + np.outer(Be, self.m_R)) / p)
        xi = self._cdfs(c_gamma)[0]
        return {"xi": xi, "mse_pool": parts[0], "mse_reject": parts[1],
                "mse": self.evaluate(Lambda, c_gamma)[1]}


class TapLogic:

    @staticmethod
    def eta_hat(data, estimand, mu_A, fit):
        """n_B^1/2 N_hat^-1 sum Phi_B(mu_A): per la media n_B^1/2 (mu_B - mu_A)."""
        return math.sqrt(data.n_B) * PhiB.from_fit(estimand, fit).normalized_sum(data, mu_A)

    @staticmethod
    def quadratic_form(eta, Sigma_T):
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        Sigma_T = np.atleast_2d(np.asarray(Sigma_T, dtype=float))
        if not np.all(np.isfinite(Sigma_T)):
            raise SingularityError("Sigma_T con valori non finiti")
        try:
            if np.linalg.eigvalsh((Sigma_T + Sigma_T.T) / 2.0).min() <= 0:
                raise SingularityError("Sigma_T non definita positiva")
            return float(eta @ np.linalg.solve(Sigma_T, eta))
        except np.linalg.LinAlgError:
            raise SingularityError("Sigma_T singolare nella statistica test")

    @staticmethod
    def test_statistic(data, estimand, mu_A, fit, Sigma_T):
        return TapLogic.quadratic_form(TapLogic.eta_hat(data, estimand, mu_A, fit), Sigma_T)

    @staticmethod
    def local_means(eta, varcomps, c_gamma=None):
        """mu1 = -Sigma_S^-1/2 J_B^-1 eta, mu2 = -Sigma_T^-1/2 eta, xi = F_l(c; mu2^T mu2 / 2)."""
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        mu2 = -psd_inv_sqrt(varcomps.Sigma_T) @ eta
        try:
            mu1 = -psd_inv_sqrt(varcomps.Sigma_S) @ np.linalg.solve(varcomps.jac_B, eta)
        except np.linalg.LinAlgError:
            raise SingularityError("Jacobiano J_B singolare")
        xi = None
        if c_gamma is not None:
            xi = NoncentralChiSq.from_mean(mu2).cdf(c_gamma)
        return LocalMeans(mu1, mu2, xi)

    @staticmethod
    def mse_surface(tuning, eta, varcomps):
        """Distorsione e MSE asintotici di n^1/2(mu_tap - mu) nella forma matriciale generale."""
        return MseSurface(eta, varcomps).evaluate(tuning.Lambda, tuning.c_gamma)

    @staticmethod
    def mse_decomposition(tuning, eta, varcomps):
        return MseSurface(eta, varcomps).decomposition(tuning.Lambda, tuning.c_gamma)

    @staticmethod
    def mse_scalar(tuning, eta, varcomps):
        """
        Forma chiusa per l = 1 con i coefficienti d0..d5:
        bias = eta d0
        mse  = V_eff d1 + V_Beff d2 + V_Aeff d3 + s_e (s_B d4 + s_A d5)
        dove s_A, s_B, s_e sono le radici con il segno dei rispettivi caricamenti.
        """
        vc = varcomps
        if vc.l != 1:
            raise DomainError("La forma scalare richiede l = 1")
        eta = float(np.atleast_1d(eta)[0])
        Lambda, c = tuning.Lambda, tuning.c_gamma
        V_A, V_B, G = vc.V_A[0, 0], vc.V_B[0, 0], vc.Gamma[0, 0]
        J, f_B = vc.jac_B[0, 0], vc.f_B
        if c <= 0:
            return 0.0, V_A

        omega_A, omega_B = (w[0, 0] for w in pool_weights(Lambda, vc.jac_A, vc.jac_B))
        means = TapLogic.local_means(eta, vc)
        mu1, mu2 = means.mu1[0], means.mu2[0]
        delta = mu2 * mu2 / 2.0
        F3 = NoncentralChiSq(3, delta).cdf(c)
        F5 = NoncentralChiSq(5, delta).cdf(c)
        G_in = F3 + mu2 ** 2 * F5
        G_out = (1.0 - F3) + mu2 ** 2 * (1.0 - F5)

        root_D = math.sqrt(V_A + V_B - 2.0 * G)
        s_A = -(V_A - G) * np.sign(J) / root_D
        s_B = (G - V_B) * np.sign(J) / root_D
        V_eff = vc.V_eff[0, 0]
        s_e = np.sign(V_A - G) * math.sqrt(max(V_eff, 0.0))
        rho = s_A / s_B if s_B != 0 else 0.0

        d0 = -omega_B * F3 / (math.sqrt(f_B) * J)
        d1 = 1.0 + mu1 ** 2
        d2 = omega_B * (omega_B - 2.0 * rho * omega_A) * G_in
        d3 = G_out + omega_A ** 2 * G_in
        d4 = -2.0 * omega_B * mu1 * mu2 * F3
        d5 = 2.0 * mu1 * mu2 * (1.0 - F3 + omega_A * F3)

        bias = eta * d0
        mse = V_eff * d1 + s_B ** 2 * d2 + s_A ** 2 * d3 + s_e * (s_B * d4 + s_A * d5)
        return bias, mse

    @staticmethod
    def _to_box(t, upper):
        return min(max(math.expm1(t), 0.0), upper)

    @staticmethod
    def tune(eta_hat, varcomps, opts=None):
        """
        Minimizza trace(mse(Lambda, c; eta_hat)) con Nelder-Mead su
        (log(1+Lambda), log(1+c)) nel box [0, Lambda_max] x [0, c_max].
        """
        opts = opts or TapOptions()
        surface = MseSurface(eta_hat, varcomps)
        l = varcomps.l
        lam_fixed = opts.force_lambda
        c_fixed = opts.force_c_gamma
        if opts.fix_c:
            c_fixed = chisq_quantile(Config.PRETEST_LEVEL, l)
        if lam_fixed is not None and c_fixed is not None:
            return TuningParams(lam_fixed, c_fixed)

        free = [k for k, fixed in (("lambda", lam_fixed), ("c", c_fixed)) if fixed is None]
        upper = {"lambda": opts.lambda_max, "c": opts.c_max}

        def unpack(theta):
            values = dict(zip(free, theta))
            lam = lam_fixed if lam_fixed is not None else TapLogic._to_box(values["lambda"], opts.lambda_max)
            c = c_fixed if c_fixed is not None else TapLogic._to_box(values["c"], opts.c_max)
            return lam, c

        def objective(theta):
            lam, c = unpack(theta)
            return float(np.trace(surface.evaluate(lam, c)[1]))

        lam_start = min(max(varcomps.lambda_eff_scalar(), 0.0), opts.lambda_max)
        anchor = {"lambda": math.log1p(lam_start), "c": math.log1p(chisq_quantile(Config.PRETEST_LEVEL, l))}
        starts = [np.array([anchor[k] for k in free]), np.zeros(len(free))]

        axes = [np.linspace(0.0, math.log1p(upper[k]), Config.TUNE_COARSE_GRID) for k in free]
        grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(free), -1).T
        values = [objective(theta) for theta in grid]
        starts.append(grid[int(np.argmin(values))])

        result = nelder_mead(objective, starts[0], starts=starts[1:], restarts=opts.restarts, seed=opts.seed)
        lam, c = unpack(result.x)
        edge = 1.0 - Config.BOX_EDGE_REL
        tuning = TuningParams(lam, c,
                              unbounded_lambda=lam_fixed is None and lam >= opts.lambda_max * edge,
                              unbounded_c=c_fixed is None and c >= opts.c_max * edge,
                              warn=result.warn)
        if tuning.unbounded_lambda or tuning.unbounded_c:
            logger.info("Tuning al bordo del box (effettivamente illimitato): %s", tuning)
        logger.debug("Tuning: %s, mse=%.6g", tuning, result.fun)
        return tuning

    @staticmethod
    def estimate_tap(data, estimand, strategy=Config.DEFAULT_STRATEGY, opts=None, point=None, varcomps=None):
        """
        Pipeline: disturbi -> mu_A, mu_B -> componenti di varianza -> eta_hat, T
        -> tuning -> decisione (pooling se T < c_gamma*).
        """
        opts = opts or TapOptions()
        stage = "nuisance"
        try:
            if point is None:
                fit = NuisanceLogic.fit(data, estimand, strategy)
                stage = "point-estimates"
                mu_A = EstimationLogic.estimate_mu_A(data, estimand)
                mu_B = EstimationLogic.estimate_mu_B(data, estimand, fit)
                jac_A, jac_B = EstimationLogic.jacobians(data, estimand, fit)
                point = PointEstimates(mu_A, mu_B, fit, jac_A, jac_B)

            stage = "varcomps"
            if varcomps is None:
                if opts.variance == Config.VARIANCE_PLUGIN:
                    varcomps = EstimationLogic.variance_plugin(data, estimand, point.fit, point)
                else:
                    varcomps = EstimationLogic.variance_bootstrap(
                        data, estimand, strategy, opts.bootstrap_K, opts.seed,
                        refit=opts.refit_nuisance, n_jobs=opts.n_jobs, point=point)

            stage = "pretest"
            eta = Hypotheses(eta_hat=TapLogic.eta_hat(data, estimand, point.mu_A, point.fit)).eta_hat
            T = TapLogic.quadratic_form(eta, varcomps.Sigma_T)

            stage = "tuning"
            tuning = TapLogic.tune(eta, varcomps, opts)

            stage = "decision"
            pooled = T < tuning.c_gamma
            value = EstimationLogic.estimate_pooled(point, tuning.Lambda) if pooled else point.mu_A.copy()
        except TapError as e:
            raise StageError(stage, e) from e

        logger.info("Test-and-pool (%s): T=%.4f, %s, %s", strategy, T, tuning,
                    "pooling" if pooled else "solo campione A")
        return TapEstimate(value, T, pooled, tuning, eta, varcomps, point.mu_A, point.mu_B,
                           strategy, estimand, fit=point.fit)

    @staticmethod
    def simulate_limit(mu2, tuning, varcomps, size, rng):
        """
        Estrazioni dalla legge limite di n^1/2(mu_tap - mu) dato mu2: i rami
        pooling/rifiuto sono scelti con probabilita' xi e W2 e' estratto dalla
        normale troncata del ramo. Un ramo con massa < soglia di accettazione
        viene trascurato.
        """
        mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
        vc = varcomps
        l = vc.l
        L_A, L_B = vc.loadings()
        omega_A, omega_B = pool_weights(tuning.Lambda, vc.jac_A, vc.jac_B)
        M_pool = omega_A @ L_A - omega_B @ L_B
        c = tuning.c_gamma
        xi = NoncentralChiSq.from_mean(mu2).cdf(c) if c > 0 else 0.0

        n_in = int(rng.binomial(size, xi)) if 0.0 < xi < 1.0 else (size if xi >= 1.0 else 0)
        if n_in and xi < Config.REJECTION_MIN_ACCEPT:
            n_in = 0
        if size - n_in and (1.0 - xi) < Config.REJECTION_MIN_ACCEPT:
            n_in = size
        parts = []
        if n_in:
            parts.append(sample_trunc_w2(mu2, TruncRegion(0.0, c), rng, n_in) @ M_pool.T)
        if size - n_in:
            parts.append(sample_trunc_w2(mu2, TruncRegion(c, np.inf), rng, size - n_in) @ L_A.T)
        shifts = np.vstack(parts)
        regular = -L_A @ mu2 + rng.standard_normal((size, l)) @ psd_sqrt(vc.V_eff).T
        return regular + shifts
