"""
Funzioni di stima del campione probabilistico (Phi_A) e della versione
doppiamente robusta che usa il campione non probabilistico (Phi_B).

Tutte le funzioni sono lineari in mu, quindi le radici hanno forma chiusa.
"""
import numpy as np

from conf.SystemConfiguration import SystemConfig as Config
from utils.tap_errors import DomainError, PropensityUnderflowError, SingularityError


class PhiA:
    def __init__(self, estimand):
        self.estimand = estimand

    def __call__(self, X, y, d, mu):
        """Contributi d * g(x)(z - g(x)^T mu), una riga per unita'."""
        return np.asarray(d, dtype=float)[:, None] * self.estimand.score(X, y, mu)

    def jacobian(self, X, d):
        """d/dmu della somma dei contributi (non normalizzata)."""
        g = self.estimand.features(X)
        return -(g * np.asarray(d, dtype=float)[:, None]).T @ g

    def solve(self, X, y, d):
        """Radice di sum Phi_A = 0: un passo di Newton da zero, esatto per funzioni lineari."""
        mu0 = np.zeros(self.estimand.dimension(np.asarray(X).shape[1]))
        U = self(X, y, d, mu0).sum(axis=0)
        J = self.jacobian(X, d)
        try:
            return mu0 - np.linalg.solve(J, U)
        except np.linalg.LinAlgError:
            raise SingularityError("Jacobiano di Phi_A singolare")


class PhiB:
    """
    Forma aumentata:
    media/proporzione  delta_B (z - m)/pi_B + delta_A d m - mu
    regressione        (delta_A d + delta_B / pi_B) x (y - x^T mu)
    """

    def __init__(self, estimand, propensity, outcome, fit=None):
        self.estimand = estimand
        self.propensity = propensity
        self.outcome = outcome
        self.fit = fit

    @classmethod
    def from_fit(cls, estimand, fit):
        return cls(estimand, fit.propensity, fit.outcome, fit=fit)

    def _inverse_propensity(self, X, delta_B):
        pi = np.asarray(self.propensity(X), dtype=float)
        sampled = delta_B > 0
        if np.any(pi[sampled] < Config.PROPENSITY_FLOOR):
            raise PropensityUnderflowError(
                f"Propensione sotto {Config.PROPENSITY_FLOOR:g} (minimo {pi[sampled].min():.3e})")
        inv = np.zeros_like(pi)
        inv[sampled] = 1.0 / pi[sampled]
        return pi, inv

    def __call__(self, X, y, delta_A, delta_B, d, mu):
        """Contributi per unita' (una riga per unita' della popolazione o del campione impilato)."""
        delta_A = np.asarray(delta_A, dtype=float)
        delta_B = np.asarray(delta_B, dtype=float)
        d = np.asarray(d, dtype=float)
        _, inv = self._inverse_propensity(X, delta_B)
        if self.estimand.is_regression:
            weight = delta_A * d + delta_B * inv
            return weight[:, None] * self.estimand.score(X, y, mu)
        z = self.estimand.response(y)
        m = np.asarray(self.outcome(X), dtype=float)
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        value = delta_B * inv * (z - m) + delta_A * d * m - mu[0]
        return value[:, None]

    def normalized_sum(self, data, mu):
        """
        N^-1 sum Phi_B(mu) sui dati campionari, con N stimato da sum_A d
        (il termine -mu della popolazione diventa -N_hat mu).
        """
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        X, y, delta_A, delta_B, d = data.stacked()
        if self.estimand.is_regression:
            return self(X, y, delta_A, delta_B, d, mu).sum(axis=0) / data.N_hat
        augmented = self(X, y, delta_A, delta_B, d, np.zeros(1)).sum(axis=0)
        return augmented / data.N_hat - mu

    def jacobian_mu(self, data):
        """d/dmu di N_hat^-1 sum Phi_B."""
        if not self.estimand.is_regression:
            return -np.eye(1)
        X, _, delta_A, delta_B, d = data.stacked()
        _, inv = self._inverse_propensity(X, delta_B)
        weight = delta_A * d + delta_B * inv
        return -(X * weight[:, None]).T @ X / data.N_hat

    def jacobian_tau(self, data, mu):
        """
        d/d(alpha, beta) di N_hat^-1 sum Phi_B a mu fissato; richiede il fit
        parametrico dei modelli di disturbo.

        Returns:
            matrice l x (2p)
        """
        if self.fit is None:
            raise DomainError("Lo jacobiano in tau richiede un NuisanceFit")
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        XA, XB = data.prob.X, data.nonprob.X
        pi_B = self.fit.propensity(XB)
        dinv = -(1.0 - pi_B) / pi_B  # d(1/pi)/d(x^T alpha)
        if self.estimand.is_regression:
            resid = data.nonprob.y - XB @ mu
            d_alpha = (XB * (resid * dinv)[:, None]).T @ XB / data.N_hat
            return np.hstack([d_alpha, np.zeros((XB.shape[1], XB.shape[1]))])
        z_B = self.estimand.response(data.nonprob.y)
        m_B = self.fit.outcome(XB)
        d_alpha = ((z_B - m_B) * dinv) @ XB / data.N_hat
        grad_A = self.fit.outcome_gradient(XA)
        grad_B = self.fit.outcome_gradient(XB)
        d_beta = (data.prob.d @ grad_A - (1.0 / pi_B) @ grad_B) / data.N_hat
        return np.concatenate([d_alpha, d_beta])[None, :]
