import logging

import numpy as np

from conf.SystemConfiguration import SystemConfig as Config
from utils.num_kernel import psd_inv_sqrt
from utils.tap_errors import CauchySchwarzError, DimensionMismatchError, SingularityError

logger = logging.getLogger(__name__)


def _as_matrix(M):
    return np.atleast_2d(np.asarray(M, dtype=float))


def pool_weights(Lambda, jac_A, jac_B):
    """
    Pesi della combinazione lineare sum{Phi_A + Lambda Phi_B} = 0:
    omega_A = (J_A + Lambda J_B)^-1 J_A,  omega_B = (J_A + Lambda J_B)^-1 Lambda J_B.
    """
    jac_A, jac_B = _as_matrix(jac_A), _as_matrix(jac_B)
    l = jac_A.shape[0]
    Lambda = np.asarray(Lambda, dtype=float)
    Lambda = Lambda * np.eye(l) if Lambda.ndim == 0 else _as_matrix(Lambda)
    LJ = Lambda @ jac_B
    try:
        omega_B = np.linalg.solve(jac_A + LJ, LJ)
    except np.linalg.LinAlgError:
        raise SingularityError("J_A + Lambda J_B singolare")
    # omega_A come complemento: la somma resta I per costruzione
    return np.eye(l) - omega_B, omega_B


class VarComps:
    """
    Componenti di varianza di n^1/2 (mu_A - mu, mu_B - mu) e quantita' derivate
    (Sigma_T, Sigma_S, Lambda_eff, V_eff, V_Aeff, V_Beff, caricamenti).
    """

    def __init__(self, V_A, V_B, Gamma, jac_A, jac_B, f_B, n=None, clamped=False, dropped=0):
        self.V_A = _as_matrix(V_A)
        self.V_B = _as_matrix(V_B)
        self.Gamma = _as_matrix(Gamma)
        self.jac_A = _as_matrix(jac_A)
        self.jac_B = _as_matrix(jac_B)
        self.f_B = float(f_B)
        self.n = n
        self.clamped = clamped
        self.dropped = dropped

        l = self.V_A.shape[0]
        for name, M in (("V_B", self.V_B), ("Gamma", self.Gamma), ("jac_A", self.jac_A), ("jac_B", self.jac_B)):
            if M.shape != (l, l):
                raise DimensionMismatchError(f"{name} ha forma {M.shape}, attesa {(l, l)}")
        self.V_A = (self.V_A + self.V_A.T) / 2.0
        self.V_B = (self.V_B + self.V_B.T) / 2.0
        self._derive()

    @property
    def l(self):
        return self.V_A.shape[0]

    def _derive(self):
        V_A, V_B, G, J_B = self.V_A, self.V_B, self.Gamma, self.jac_B
        self.D = V_A + V_B - G - G.T
        eig = np.linalg.eigvalsh((self.D + self.D.T) / 2.0)
        scale = max(np.abs(np.linalg.eigvalsh(V_A)).max(), np.abs(np.linalg.eigvalsh(V_B)).max(), 1e-300)
        if eig.min() < -Config.PSD_EIG_TOL * scale:
            raise CauchySchwarzError(f"V_A + V_B - Gamma - Gamma^T non semidefinita (autovalore {eig.min():.3e})")

        self.Sigma_T = self.f_B * J_B @ self.D @ J_B.T
        self.Sigma_T = (self.Sigma_T + self.Sigma_T.T) / 2.0
        try:
            D_inv = np.linalg.inv(self.D)
            self.V_eff = V_A - (V_A - G) @ D_inv @ (V_A - G).T
            self.Lambda_eff = self.jac_A @ (V_A - G) @ np.linalg.inv(V_B - G.T) @ np.linalg.inv(J_B)
            A = (G.T - V_B) @ np.linalg.inv(G - V_A)
        except np.linalg.LinAlgError:
            raise SingularityError("Componenti di varianza singolari (V_A = Gamma o V_B = Gamma^T)")
        self.V_eff = (self.V_eff + self.V_eff.T) / 2.0
        self.V_Aeff = V_A - self.V_eff
        self.V_Beff = V_B - self.V_eff
        S = A @ V_A @ A.T + A @ G + (A @ G).T + V_B
        self.Sigma_S = self.f_B * (S + S.T) / 2.0

    def loadings(self):
        """
        Caricamenti di n^1/2(mu_A - mu) e n^1/2(mu_B - mu) su W2 (componente
        standardizzata del test): mu_A = R + L_A W2, mu_B = R - L_B W2.
        """
        T_inv_sqrt = psd_inv_sqrt(self.Sigma_T)
        root_f = np.sqrt(self.f_B)
        L_A = -root_f * (self.V_A - self.Gamma) @ self.jac_B.T @ T_inv_sqrt
        L_B = root_f * (self.Gamma.T - self.V_B) @ self.jac_B.T @ T_inv_sqrt
        return L_A, L_B

    def pooled_variance(self, Lambda):
        omega_A, omega_B = pool_weights(Lambda, self.jac_A, self.jac_B)
        cross = omega_A @ self.Gamma @ omega_B.T
        return omega_A @ self.V_A @ omega_A.T + cross + cross.T + omega_B @ self.V_B @ omega_B.T

    def lambda_eff_scalar(self):
        """Scalare rappresentativo di Lambda_eff (traccia / l), usato come partenza del tuning."""
        return float(np.trace(self.Lambda_eff)) / self.l

    def to_dict(self):
        return {"V_A": self.V_A.tolist(), "V_B": self.V_B.tolist(), "Gamma": self.Gamma.tolist(),
                "jac_A": self.jac_A.tolist(), "jac_B": self.jac_B.tolist(), "f_B": self.f_B,
                "n": self.n, "clamped": self.clamped, "dropped": self.dropped}

    @classmethod
    def from_dict(cls, data):
        return cls(data["V_A"], data["V_B"], data["Gamma"], data["jac_A"], data["jac_B"], data["f_B"],
                   n=data.get("n"), clamped=data.get("clamped", False), dropped=data.get("dropped", 0))

    @classmethod
    def toy(cls, V_A=Config.TOY_V_A, V_B=Config.TOY_V_B, Gamma=Config.TOY_GAMMA,
            f_B=Config.TOY_F_B, jac=Config.TOY_JAC):
        """Componenti scalari dell'esempio giocattolo (media, J = -1)."""
        return cls([[V_A]], [[V_B]], [[Gamma]], [[jac]], [[jac]], f_B)
