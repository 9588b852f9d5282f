import logging

import numpy as np
from joblib import Parallel, delayed

from conf.SystemConfiguration import SystemConfig as Config
from model.estimating_functions import PhiA, PhiB
from model.nuisance_fit import NuisanceLogic
from model.var_comps import VarComps, pool_weights
from utils.num_kernel import SeedPlan, nearest_psd
from utils.tap_errors import (
    ConvergenceError,
    DomainError,
    ReplicateFailureError,
    SingularityError,
    TapError,
    UnsupportedEstimandError,
)

logger = logging.getLogger(__name__)


class PointEstimates:
    def __init__(self, mu_A, mu_B, fit, jac_A, jac_B):
        self.mu_A = np.atleast_1d(np.asarray(mu_A, dtype=float))
        self.mu_B = np.atleast_1d(np.asarray(mu_B, dtype=float))
        self.fit = fit
        self.jac_A = np.atleast_2d(jac_A)
        self.jac_B = np.atleast_2d(jac_B)


class ReplicateSet:
    """Stime bootstrap: mu_A (K x l) e, per strategia, mu_B (K x l); le replicazioni fallite sono scartate."""

    def __init__(self, mu_A, mu_B, dropped, requested):
        self.mu_A = mu_A
        self.mu_B = mu_B
        self.dropped = dropped
        self.requested = requested

    @property
    def size(self):
        return self.mu_A.shape[0]


class EstimationLogic:

    @staticmethod
    def estimate_mu_A(data, estimand):
        """Radice dell'equazione pesata per il disegno (rapporto di Hajek per la media)."""
        if not estimand.is_regression:
            z = estimand.response(data.prob.y)
            d = data.prob.d
            return np.array([d @ z / d.sum()])
        return PhiA(estimand).solve(data.prob.X, data.prob.y, data.prob.d)

    @staticmethod
    def estimate_mu_B(data, estimand, fit):
        """Radice di N_hat^-1 sum Phi_B = 0 con i disturbi stimati."""
        if not fit.converged:
            raise ConvergenceError(f"Modelli di disturbo ({fit.strategy}) non convergenti")
        phi = PhiB.from_fit(estimand, fit)
        if not estimand.is_regression:
            return phi.normalized_sum(data, np.zeros(1))
        J = phi.jacobian_mu(data)
        U0 = phi.normalized_sum(data, np.zeros(data.p))
        try:
            return -np.linalg.solve(J, U0)
        except np.linalg.LinAlgError:
            raise SingularityError("Jacobiano di Phi_B singolare")

    @staticmethod
    def jacobians(data, estimand, fit):
        """E{dPhi_A/dmu}, E{dPhi_B/dmu} normalizzati per N_hat."""
        jac_A = PhiA(estimand).jacobian(data.prob.X, data.prob.d) / data.N_hat
        jac_B = PhiB.from_fit(estimand, fit).jacobian_mu(data)
        return jac_A, jac_B

    @staticmethod
    def point_estimates(data, estimand, strategy=Config.DEFAULT_STRATEGY):
        fit = NuisanceLogic.fit(data, estimand, strategy)
        mu_A = EstimationLogic.estimate_mu_A(data, estimand)
        mu_B = EstimationLogic.estimate_mu_B(data, estimand, fit)
        jac_A, jac_B = EstimationLogic.jacobians(data, estimand, fit)
        return PointEstimates(mu_A, mu_B, fit, jac_A, jac_B)

    @staticmethod
    def naive_mean(data, estimand):
        """Stima non pesata sul solo campione B (media campionaria o OLS)."""
        if estimand.is_regression:
            return NuisanceLogic.fit_outcome_ols(data, "B")
        return np.array([estimand.response(data.nonprob.y).mean()])

    @staticmethod
    def naive_variance(data, estimand):
        """Varianza della stima naive (solo media/proporzione): s^2_B / n_B."""
        if estimand.is_regression:
            raise UnsupportedEstimandError("Varianza naive disponibile solo per media e proporzione")
        z = estimand.response(data.nonprob.y)
        return float(z.var(ddof=1) / z.size)

    @staticmethod
    def pool_weights(Lambda, jac_A, jac_B):
        return pool_weights(Lambda, jac_A, jac_B)

    @staticmethod
    def lambda_eff(varcomps):
        return varcomps.Lambda_eff

    @staticmethod
    def estimate_pooled(point, Lambda):
        """
        Radice di sum{Phi_A + Lambda Phi_B} = 0. Le funzioni sono lineari in mu,
        quindi la radice e' omega_A mu_A + omega_B mu_B.
        """
        Lambda = np.asarray(Lambda, dtype=float)
        if not np.any(Lambda):
            return point.mu_A.copy()
        omega_A, omega_B = pool_weights(Lambda, point.jac_A, point.jac_B)
        return omega_A @ point.mu_A + omega_B @ point.mu_B

    # ----- Varianza plug-in (funzioni d'influenza) -----

    @staticmethod
    def variance_plugin(data, estimand, fit, point=None):
        """
        V_A, V_B, Gamma dalle funzioni d'influenza stimate di mu_A e mu_B
        (media e proporzione).
        """
        if estimand.is_regression:
            raise UnsupportedEstimandError("Varianza plug-in solo per media/proporzione: usare il bootstrap")
        if point is None:
            mu_A = EstimationLogic.estimate_mu_A(data, estimand)
        else:
            mu_A = point.mu_A
        XA, XB, d = data.prob.X, data.nonprob.X, data.prob.d
        z_A = estimand.response(data.prob.y)
        z_B = estimand.response(data.nonprob.y)
        N_hat, n = data.N_hat, data.n

        pi_B = fit.propensity(XB)
        pi_at_A = fit.propensity(XA)
        m_B, m_A = fit.outcome(XB), fit.outcome(XA)

        h = np.sum((z_B - m_B) / pi_B) / N_hat
        e = z_B - m_B - h
        lhs = (XB * (1.0 - pi_B)[:, None]).T @ XB
        rhs = ((1.0 / pi_B - 1.0) * e) @ XB
        b = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
        delta = e / pi_B - XB @ b

        m_bar_A = d @ m_A / N_hat
        t = pi_at_A * (XA @ b) + m_A - m_bar_A
        zA = d * (z_A - mu_A[0])
        zB = d * t
        cA, cB = zA - zA.mean(), zB - zB.mean()
        scale = n / N_hat ** 2
        V_A = scale * cA @ cA
        V_B = scale * (np.sum((1.0 - pi_B) * delta ** 2) + cB @ cB)
        Gamma = scale * cA @ cB
        return VarComps([[V_A]], [[V_B]], [[Gamma]], [[-1.0]], [[-1.0]], data.f_B, n=n)

    # ----- Bootstrap (ricampionamento con reinserimento) -----

    @staticmethod
    def _replicate(data, estimand, strategies, plan, index, purpose, refit, fits):
        boot = data.resample(plan.stream(index, purpose))
        try:
            mu_A = EstimationLogic.estimate_mu_A(boot, estimand)
            mu_B = {}
            for strategy in strategies:
                fit = NuisanceLogic.fit(boot, estimand, strategy) if refit else fits[strategy]
                mu_B[strategy] = EstimationLogic.estimate_mu_B(boot, estimand, fit)
            return mu_A, mu_B
        except (TapError, np.linalg.LinAlgError) as e:
            logger.debug("Replicazione %d scartata: %s", index, e)
            return None

    @staticmethod
    def bootstrap_replicates(data, estimand, strategies, K, seed, purpose=Config.STREAM_VARIANCE,
                             refit=True, fits=None, n_jobs=1):
        """
        K ricampionamenti di A e B; per ciascuno mu_A e mu_B per ogni strategia
        sugli stessi dati ricampionati.
        """
        if K < 1:
            raise DomainError(f"Numero di replicazioni non valido: {K}")
        if not refit and (fits is None or any(s not in fits for s in strategies)):
            raise DomainError("Con i disturbi fissati servono i fit di ogni strategia")
        plan = SeedPlan(seed)
        results = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(EstimationLogic._replicate)(data, estimand, strategies, plan, b, purpose, refit, fits)
            for b in range(K)
        )
        kept = [r for r in results if r is not None]
        dropped = K - len(kept)
        if dropped > Config.REPLICATE_FAILURE_MAX * K:
            raise ReplicateFailureError(dropped, K, Config.REPLICATE_FAILURE_MAX)
        if dropped:
            logger.warning("⚠️ Bootstrap: %d/%d replicazioni scartate", dropped, K)
        mu_A = np.array([r[0] for r in kept])
        mu_B = {s: np.array([r[1][s] for r in kept]) for s in strategies}
        return ReplicateSet(mu_A, mu_B, dropped, K)

    @staticmethod
    def varcomps_from_replicates(mu_A_reps, mu_B_reps, n, jac_A, jac_B, f_B, dropped=0):
        """
        V_A = n/(K-1) sum (mu_A^b - media)(.)^T, analogamente V_B e Gamma; il
        blocco (V_A, Gamma; Gamma^T, V_B) viene proiettato sui PSD se necessario.
        """
        K, l = mu_A_reps.shape
        if K < 2:
            raise DomainError("Servono almeno due replicazioni")
        joint = np.cov(np.hstack([mu_A_reps, mu_B_reps]), rowvar=False, ddof=1).reshape(2 * l, 2 * l) * n
        joint, clamped = nearest_psd(joint)
        if clamped:
            logger.warning("⚠️ Matrice di covarianza bootstrap proiettata sui semidefiniti positivi")
        return VarComps(joint[:l, :l], joint[l:, l:], joint[:l, l:], jac_A, jac_B, f_B,
                        n=n, clamped=clamped, dropped=dropped)

    @staticmethod
    def variance_bootstrap(data, estimand, strategy=Config.DEFAULT_STRATEGY, K=Config.BOOTSTRAP_K_DESK,
                           seed=0, refit=True, n_jobs=1, point=None):
        if K < Config.BOOTSTRAP_K_MIN:
            raise DomainError(f"Bootstrap troppo piccolo: K={K} < {Config.BOOTSTRAP_K_MIN}")
        if point is None:
            point = EstimationLogic.point_estimates(data, estimand, strategy)
        reps = EstimationLogic.bootstrap_replicates(data, estimand, [strategy], K, seed, refit=refit,
                                                    fits={strategy: point.fit}, n_jobs=n_jobs)
        return EstimationLogic.varcomps_from_replicates(reps.mu_A, reps.mu_B[strategy], data.n,
                                                        point.jac_A, point.jac_B, data.f_B, reps.dropped)
