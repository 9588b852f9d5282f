import numpy as np
from scipy import linalg

from utils.tap_errors import ConfigError, DomainError


class Estimand:
    """
    Famiglia del parametro d'interesse: media, proporzione sotto soglia,
    coefficienti della regressione di popolazione.
    """

    MEAN = "mean"
    PROPORTION_BELOW = "proportion_below"
    REGRESSION_COEF = "regression_coef"
    KINDS = (MEAN, PROPORTION_BELOW, REGRESSION_COEF)

    def __init__(self, kind, cutoff=None):
        if kind not in self.KINDS:
            raise ConfigError(f"Stimando sconosciuto: {kind} (ammessi: {', '.join(self.KINDS)})")
        if kind == self.PROPORTION_BELOW and cutoff is None:
            raise ConfigError("La proporzione sotto soglia richiede 'cutoff'")
        self.kind = kind
        self.cutoff = None if cutoff is None else float(cutoff)

    @property
    def is_regression(self):
        return self.kind == self.REGRESSION_COEF

    def dimension(self, p):
        """l = 1 per media e proporzione, l = p per la regressione."""
        return p if self.is_regression else 1

    def response(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == self.PROPORTION_BELOW:
            return (y < self.cutoff).astype(float)
        return y

    def is_binary(self, y):
        if self.kind == self.PROPORTION_BELOW:
            return True
        if self.is_regression:
            return False
        return bool(np.all((y == 0.0) | (y == 1.0)))

    def features(self, X):
        """Regressori g(x) del funzionale: colonna di uno, oppure x stesso per la regressione."""
        X = np.asarray(X, dtype=float)
        return X if self.is_regression else np.ones((X.shape[0], 1))

    def score(self, X, y, mu):
        """S(V; mu) per unita': g(x) (z - g(x)^T mu)."""
        g = self.features(X)
        z = self.response(y)
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        return g * (z - g @ mu)[:, None]

    def population_value(self, X, y):
        """Radice esatta di N^-1 sum S(V_i; mu) = 0 sulla popolazione finita."""
        z = self.response(y)
        if not self.is_regression:
            return np.array([z.mean()])
        coef, _, rank, _ = linalg.lstsq(np.asarray(X, dtype=float), z, lapack_driver="gelsy")
        if rank < X.shape[1]:
            raise DomainError("Disegno di popolazione a rango ridotto")
        return coef

    def to_dict(self):
        return {"kind": self.kind, "cutoff": self.cutoff}

    @classmethod
    def from_dict(cls, data):
        return cls(data.get("kind", cls.MEAN), data.get("cutoff"))

    def __repr__(self):
        if self.kind == self.PROPORTION_BELOW:
            return f"Estimand({self.kind}, cutoff={self.cutoff})"
        return f"Estimand({self.kind})"
