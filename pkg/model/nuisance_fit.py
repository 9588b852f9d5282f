import logging

import numpy as np
from scipy import linalg
from scipy.special import expit, log_expit

from conf.SystemConfiguration import SystemConfig as Config
from utils.tap_errors import (
    CollinearityError,
    ConfigError,
    ConvergenceError,
    DivergenceError,
    RankDeficiencyError,
    SingularityError,
)

logger = logging.getLogger(__name__)

LINEAR = "linear"
LOGISTIC = "logistic"


class NuisanceFit:
    """Modello di propensione logistico pi_B(x; alpha) e modello di risposta m(x; beta)."""

    def __init__(self, alpha, beta, strategy, converged, iterations, family=LINEAR):
        self.alpha = np.asarray(alpha, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.strategy = strategy
        self.converged = bool(converged)
        self.iterations = int(iterations)
        self.family = family

    def propensity(self, X):
        return expit(np.asarray(X, dtype=float) @ self.alpha)

    def outcome(self, X):
        eta = np.asarray(X, dtype=float) @ self.beta
        return expit(eta) if self.family == LOGISTIC else eta

    def outcome_gradient(self, X):
        """dm/dbeta per unita' (n x p)."""
        X = np.asarray(X, dtype=float)
        if self.family == LOGISTIC:
            m = self.outcome(X)
            return X * (m * (1.0 - m))[:, None]
        return X

    @property
    def tau(self):
        return np.concatenate([self.alpha, self.beta])

    def to_dict(self):
        return {"alpha": self.alpha.tolist(), "beta": self.beta.tolist(), "strategy": self.strategy,
                "converged": self.converged, "iterations": self.iterations, "family": self.family}

    @classmethod
    def from_dict(cls, data):
        return cls(data["alpha"], data["beta"], data["strategy"], data["converged"],
                   data["iterations"], data.get("family", LINEAR))


def _newton(score, jacobian, x0, n, label, objective=None):
    """
    Newton-Raphson con dimezzamento del passo. Con `objective` il passo viene
    dimezzato finche' l'obiettivo (da massimizzare) non cresce, altrimenti
    finche' la norma dello score non diminuisce.

    Returns:
        (radice, iterazioni, convergenza)
    """
    tol = Config.RESIDUAL_TOL_PER_UNIT * n
    x = np.asarray(x0, dtype=float).copy()
    U = score(x)
    for it in range(Config.NEWTON_MAX_ITER):
        if np.max(np.abs(U)) < tol:
            logger.debug("%s: convergenza in %d iterazioni", label, it)
            return x, it, True
        try:
            step = np.linalg.solve(jacobian(x), -U)
        except np.linalg.LinAlgError:
            raise SingularityError(f"{label}: jacobiano singolare all'iterazione {it}")

        current = objective(x) if objective is not None else np.linalg.norm(U)
        t = 1.0
        for _ in range(Config.NEWTON_MAX_HALVINGS):
            candidate = x + t * step
            if objective is not None:
                better = objective(candidate) >= current
            else:
                better = np.linalg.norm(score(candidate)) < current
            if better:
                break
            t /= 2.0
        x = x + t * step
        if np.linalg.norm(x) > Config.ALPHA_DIVERGENCE_NORM:
            raise DivergenceError(f"{label}: divergenza (||x|| = {np.linalg.norm(x):.3e}, possibile separazione)")
        U = score(x)

    converged = bool(np.max(np.abs(U)) < tol)
    if not converged:
        logger.warning("⚠️ %s: nessuna convergenza dopo %d iterazioni (residuo %.3e)",
                       label, Config.NEWTON_MAX_ITER, np.max(np.abs(U)))
    return x, Config.NEWTON_MAX_ITER, converged


class NuisanceLogic:

    @staticmethod
    def check_collinearity(data):
        X, _, _, _, _ = data.stacked()
        cond = np.linalg.cond(X.T @ X)
        if not np.isfinite(cond) or cond > Config.GRAM_COND_MAX:
            raise CollinearityError(f"Covariate collineari (numero di condizione {cond:.3e})")

    @staticmethod
    def pseudo_ml_score(data, alpha):
        """sum_B x - sum_A d pi_B(x; alpha) x"""
        XA, d = data.prob.X, data.prob.d
        return data.nonprob.X.sum(axis=0) - (d * expit(XA @ alpha)) @ XA

    @staticmethod
    def fit_propensity_pseudo_ml(data):
        """
        Massimizza la pseudo log-verosimiglianza
        l*(alpha) = sum_B x^T alpha - sum_A d log(1 + exp(x^T alpha)).

        Returns:
            (alpha, iterazioni, convergenza)
        """
        NuisanceLogic.check_collinearity(data)
        XA, XB, d = data.prob.X, data.nonprob.X, data.prob.d
        sum_B = XB.sum(axis=0)

        def objective(alpha):
            return float(sum_B @ alpha + d @ log_expit(-(XA @ alpha)))

        def jacobian(alpha):
            pi = expit(XA @ alpha)
            return -(XA * (d * pi * (1.0 - pi))[:, None]).T @ XA

        return _newton(lambda a: NuisanceLogic.pseudo_ml_score(data, a), jacobian,
                       np.zeros(data.p), data.n, "pseudo-ML", objective=objective)

    @staticmethod
    def _scope_rows(data, scope, z_A, z_B):
        if scope == "B":
            return data.nonprob.X, z_B
        if scope == "AB":
            return np.vstack([data.prob.X, data.nonprob.X]), np.concatenate([z_A, z_B])
        raise ConfigError(f"Ambito del modello di risposta sconosciuto: {scope}")

    @staticmethod
    def fit_outcome_ols(data, scope="B", estimand=None):
        """Minimi quadrati (QR con pivoting) su B oppure su A e B insieme."""
        z_A, z_B = data.prob.y, data.nonprob.y
        if estimand is not None:
            z_A, z_B = estimand.response(z_A), estimand.response(z_B)
        X, z = NuisanceLogic._scope_rows(data, scope, z_A, z_B)
        beta, _, rank, _ = linalg.lstsq(X, z, lapack_driver="gelsy")
        if rank < X.shape[1]:
            raise RankDeficiencyError(f"Matrice di disegno ({scope}) a rango {rank} < {X.shape[1]}")
        return beta

    @staticmethod
    def fit_outcome_logistic(data, scope, estimand):
        """Massima verosimiglianza logistica per risposte binarie, stesso ambito dei minimi quadrati."""
        X, z = NuisanceLogic._scope_rows(data, scope, estimand.response(data.prob.y),
                                         estimand.response(data.nonprob.y))

        def score(beta):
            return (z - expit(X @ beta)) @ X

        def jacobian(beta):
            m = expit(X @ beta)
            return -(X * (m * (1.0 - m))[:, None]).T @ X

        def objective(beta):
            eta = X @ beta
            return float(z @ log_expit(eta) + (1.0 - z) @ log_expit(-eta))

        beta, _, converged = _newton(score, jacobian, np.zeros(X.shape[1]), data.n,
                                     f"logistica-{scope}", objective=objective)
        if not converged:
            raise ConvergenceError(f"Modello di risposta logistico ({scope}) non convergente")
        return beta

    @staticmethod
    def kh_scores(data, estimand, alpha, beta, family=LINEAR):
        """
        Equazioni congiunte:
        U1 = sum_B x / pi_B - sum_A d x
        U2 = sum_B (1/pi_B - 1) x (z - m(x; beta))
        """
        XA, XB, d = data.prob.X, data.nonprob.X, data.prob.d
        inv = 1.0 + np.exp(-(XB @ alpha))
        z_B = estimand.response(data.nonprob.y)
        fit = NuisanceFit(alpha, beta, Config.STRATEGY_KH, False, 0, family)
        U1 = inv @ XB - d @ XA
        U2 = ((inv - 1.0) * (z_B - fit.outcome(XB))) @ XB
        return np.concatenate([U1, U2])

    @staticmethod
    def fit_kh_joint(data, estimand, family=LINEAR):
        """Newton congiunto sul sistema impilato di 2p equazioni; partenza alpha = 0, beta = OLS su B."""
        NuisanceLogic.check_collinearity(data)
        XB = data.nonprob.X
        p = data.p
        z_B = estimand.response(data.nonprob.y)
        if family == LOGISTIC:
            beta0 = NuisanceLogic.fit_outcome_logistic(data, "B", estimand)
        else:
            beta0 = NuisanceLogic.fit_outcome_ols(data, "B", estimand)

        def score(theta):
            return NuisanceLogic.kh_scores(data, estimand, theta[:p], theta[p:], family)

        def jacobian(theta):
            alpha, beta = theta[:p], theta[p:]
            inv = 1.0 + np.exp(-(XB @ alpha))
            dinv = -(inv - 1.0)  # d(1/pi)/d(x^T alpha) = -(1 - pi)/pi
            fit = NuisanceFit(alpha, beta, Config.STRATEGY_KH, False, 0, family)
            resid = z_B - fit.outcome(XB)
            J11 = (XB * dinv[:, None]).T @ XB
            J21 = (XB * (dinv * resid)[:, None]).T @ XB
            J22 = -(XB * (inv - 1.0)[:, None]).T @ fit.outcome_gradient(XB)
            return np.block([[J11, np.zeros((p, p))], [J21, J22]])

        theta, iterations, converged = _newton(score, jacobian, np.concatenate([np.zeros(p), beta0]),
                                               data.n, "KH")
        return theta[:p], theta[p:], iterations, converged

    @staticmethod
    def fit(data, estimand, strategy=Config.DEFAULT_STRATEGY):
        """Adatta i modelli di disturbo secondo la strategia scelta."""
        if strategy not in Config.NUISANCE_STRATEGIES:
            raise ConfigError(f"Strategia sconosciuta: {strategy} (ammesse: {', '.join(Config.NUISANCE_STRATEGIES)})")
        y_all = np.concatenate([data.prob.y, data.nonprob.y])
        family = LOGISTIC if estimand.is_binary(y_all) else LINEAR

        if strategy == Config.STRATEGY_KH:
            alpha, beta, iterations, converged = NuisanceLogic.fit_kh_joint(data, estimand, family)
        else:
            alpha, iterations, converged = NuisanceLogic.fit_propensity_pseudo_ml(data)
            scope = "B" if strategy == Config.STRATEGY_PSEUDO_ML_OLS_B else "AB"
            if family == LOGISTIC:
                beta = NuisanceLogic.fit_outcome_logistic(data, scope, estimand)
            else:
                beta = NuisanceLogic.fit_outcome_ols(data, scope, estimand)
        return NuisanceFit(alpha, beta, strategy, converged, iterations, family)
