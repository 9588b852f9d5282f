import functools

import numpy as np

from conf.SystemConfiguration import SystemConfig as Config
from model.estimand import Estimand
from model.nuisance_fit import LINEAR, NuisanceFit
from model.var_comps import VarComps
from utils.senml_helper import SenMLHelper
from utils.tap_errors import DomainError


class Hypotheses:
    """Parametro locale eta (vero o ipotizzato) e la sua stima eta_hat."""

    def __init__(self, eta=None, eta_hat=None):
        self.eta = None if eta is None else np.atleast_1d(np.asarray(eta, dtype=float))
        self.eta_hat = None if eta_hat is None else np.atleast_1d(np.asarray(eta_hat, dtype=float))
        for v in (self.eta, self.eta_hat):
            if v is not None and not np.all(np.isfinite(v)):
                raise DomainError("Parametro locale non finito")


class LocalMeans:
    def __init__(self, mu1, mu2, xi=None):
        self.mu1 = np.atleast_1d(mu1)
        self.mu2 = np.atleast_1d(mu2)
        self.xi = xi


class TuningParams:
    def __init__(self, Lambda, c_gamma, unbounded_lambda=False, unbounded_c=False, warn=False):
        if Lambda < 0 or c_gamma < 0:
            raise DomainError(f"Parametri di tuning negativi: Lambda={Lambda}, c={c_gamma}")
        self.Lambda = float(Lambda)
        self.c_gamma = float(c_gamma)
        self.unbounded_lambda = unbounded_lambda
        self.unbounded_c = unbounded_c
        self.warn = warn

    def to_dict(self):
        return {"Lambda": self.Lambda, "c_gamma": self.c_gamma, "unbounded_lambda": self.unbounded_lambda,
                "unbounded_c": self.unbounded_c, "warn": self.warn}

    @classmethod
    def from_dict(cls, data):
        return cls(data["Lambda"], data["c_gamma"], data.get("unbounded_lambda", False),
                   data.get("unbounded_c", False), data.get("warn", False))

    def __repr__(self):
        return f"TuningParams(Lambda={self.Lambda:.4g}, c_gamma={self.c_gamma:.4g})"


class TapOptions:
    """Opzioni della pipeline test-and-pool."""

    def __init__(self, variance=Config.VARIANCE_BOOTSTRAP, bootstrap_K=Config.BOOTSTRAP_K_DESK,
                 refit_nuisance=True, fix_c=False, force_lambda=None, force_c_gamma=None,
                 lambda_max=Config.LAMBDA_MAX, c_max=Config.C_GAMMA_MAX, restarts=Config.NM_RESTARTS,
                 seed=0, n_jobs=1):
        if variance not in (Config.VARIANCE_BOOTSTRAP, Config.VARIANCE_PLUGIN):
            raise DomainError(f"Metodo di varianza sconosciuto: {variance}")
        self.variance = variance
        self.bootstrap_K = int(bootstrap_K)
        self.refit_nuisance = bool(refit_nuisance)
        self.fix_c = bool(fix_c)
        self.force_lambda = force_lambda
        self.force_c_gamma = force_c_gamma
        self.lambda_max = float(lambda_max)
        self.c_max = float(c_max)
        self.restarts = int(restarts)
        self.seed = int(seed)
        self.n_jobs = int(n_jobs)


class TapEstimate:
    def __init__(self, point, T, pooled, tuning, eta_hat, varcomps, mu_A, mu_B, strategy, estimand, fit=None):
        self.point = np.atleast_1d(np.asarray(point, dtype=float))
        self.T = float(T)
        self.pooled = bool(pooled)
        self.tuning = tuning
        self.eta_hat = np.atleast_1d(np.asarray(eta_hat, dtype=float))
        self.varcomps = varcomps
        self.mu_A = np.atleast_1d(np.asarray(mu_A, dtype=float))
        self.mu_B = np.atleast_1d(np.asarray(mu_B, dtype=float))
        self.strategy = strategy
        self.estimand = estimand
        self.fit = fit

    @property
    def l(self):
        return self.point.size

    @classmethod
    def from_report(cls, senml_json):
        """Ricostruisce la stima da un report SenML scritto da SenMLHelper.create_tap_report."""
        values = SenMLHelper.values(SenMLHelper.parse_senml(senml_json))
        get = functools.partial(SenMLHelper.collect, values)
        estimand = Estimand(get("estimand"), values.get("cutoff"))
        tuning = TuningParams(get("Lambda"), get("c_gamma"), values.get("unbounded_lambda", False),
                              values.get("unbounded_c", False), values.get("tuning_warn", False))
        n = values.get("n")
        varcomps = VarComps(get("V_A"), get("V_B"), get("Gamma"), get("jac_A"), get("jac_B"), get("f_B"),
                            n=None if n is None else int(n), clamped=values.get("clamped", False),
                            dropped=int(values.get("dropped", 0)))
        fit = None
        if "fit/converged" in values:
            fit = NuisanceFit(get("fit/alpha"), get("fit/beta"), get("strategy"), get("fit/converged"),
                              int(get("fit/iterations")), values.get("fit/family", LINEAR))
        return cls(get("point"), get("T"), get("pooled"), tuning, get("eta_hat"), varcomps,
                   get("mu_A"), get("mu_B"), get("strategy"), estimand, fit=fit)
