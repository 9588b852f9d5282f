import numpy as np

from conf.SystemConfiguration import SystemConfig as Config
from utils.tap_errors import ConfigError, DomainError

WALD = "Wald"
BACI = "BACI"
BACI_F = "BACI-F"
PACI = "PACI"
METHODS = (WALD, BACI, BACI_F, PACI)


class Interval:
    def __init__(self, lower, upper, level, method, diagnostics=None):
        if method not in METHODS:
            raise DomainError(f"Metodo di intervallo sconosciuto: {method}")
        if not lower <= upper:
            raise DomainError(f"Intervallo mal formato: [{lower}, {upper}]")
        self.lower = float(lower)
        self.upper = float(upper)
        self.level = float(level)
        self.method = method
        self.diagnostics = diagnostics or {}

    @property
    def width(self):
        return self.upper - self.lower

    def covers(self, value):
        return self.lower <= value <= self.upper

    def contains(self, other):
        return self.lower <= other.lower and other.upper <= self.upper

    def to_dict(self):
        return {"lower": self.lower, "upper": self.upper, "level": self.level,
                "method": self.method, "diagnostics": self.diagnostics}

    def __repr__(self):
        return f"{self.method}[{self.lower:.6g}, {self.upper:.6g}]"


class BaciConfig:
    """Parametri degli intervalli adattivi (BACI, BACI-F, PACI)."""

    def __init__(self, alpha=Config.CI_ALPHA, epsilon=Config.CI_EPSILON, vn_mode=Config.VN_FIXED,
                 kappa_grid=Config.KAPPA_GRID, B=Config.BACI_B_DESK, B1=Config.DOUBLE_B1,
                 B2=Config.DOUBLE_B2, budget_max=Config.DOUBLE_BUDGET_MAX,
                 mu2_half_width=Config.MU2_GRID_HALF_WIDTH, mu2_step=Config.MU2_GRID_STEP,
                 contrast=None, alpha_tilde=None, paci_draws=Config.PACI_DRAWS,
                 paci_grid_points=Config.PACI_GRID_POINTS, refit_nuisance=True, seed=0, n_jobs=1):
        if not 0.0 < alpha < 1.0:
            raise ConfigError(f"Livello alpha fuori da (0, 1): {alpha}")
        if not 0.0 < epsilon < 0.5:
            raise ConfigError(f"epsilon fuori da (0, 0.5): {epsilon}")
        if vn_mode not in (Config.VN_FIXED, Config.VN_DOUBLE):
            raise ConfigError(f"Modalita' v_n sconosciuta: {vn_mode}")
        if not kappa_grid or any(k <= 0 for k in kappa_grid):
            raise ConfigError("La griglia di kappa deve contenere valori positivi")
        if alpha_tilde is None:
            alpha_tilde = (alpha / 2.0, alpha / 2.0)
        if abs(sum(alpha_tilde) - alpha) > 1e-12:
            raise ConfigError(f"alpha_tilde {alpha_tilde} non somma ad alpha={alpha}")
        self.alpha = float(alpha)
        self.epsilon = float(epsilon)
        self.vn_mode = vn_mode
        self.kappa_grid = tuple(sorted(float(k) for k in kappa_grid))
        self.B = int(B)
        self.B1 = int(B1)
        self.B2 = int(B2)
        self.budget_max = int(budget_max)
        self.mu2_half_width = float(mu2_half_width)
        self.mu2_step = float(mu2_step)
        self.contrast = None if contrast is None else np.atleast_1d(np.asarray(contrast, dtype=float))
        self.alpha_tilde = tuple(float(a) for a in alpha_tilde)
        self.paci_draws = int(paci_draws)
        self.paci_grid_points = int(paci_grid_points)
        self.refit_nuisance = bool(refit_nuisance)
        self.seed = int(seed)
        self.n_jobs = int(n_jobs)

    def contrast_for(self, l):
        if self.contrast is None:
            a = np.zeros(l)
            a[0] = 1.0
            return a
        if self.contrast.size != l:
            raise ConfigError(f"Contrasto di dimensione {self.contrast.size}, attesa {l}")
        return self.contrast

    @property
    def level(self):
        return 1.0 - self.alpha
