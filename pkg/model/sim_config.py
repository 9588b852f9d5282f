import logging

import numpy as np
import pandas as pd

from conf.SystemConfiguration import SystemConfig as Config
from model.estimand import Estimand
from model.interval import BaciConfig
from utils.tap_errors import ConfigError

logger = logging.getLogger(__name__)

SCALE_DESK = "desk"
SCALE_FULL = "full"

# Batteria completa: stimatori puntuali e varianti test-and-pool
ESTIMATORS = ("A", "naive_B", "bc", "eff", "eff:B", "eff:KH", "tap", "tap:B", "tap:KH", "tap:fix")
TAP_VARIANTS = ("tap", "tap:B", "tap:KH", "tap:fix")
INTERVALS = ("wald", "baci-f", "baci", "paci")
DEFAULT_INTERVALS = ("wald", "baci-f", "paci")

# Colonne del CSV di sintesi (una riga per stimatore / intervallo / variante)
SUMMARY_COLUMNS = ("b", "kind", "name", "bias", "variance", "mse", "coverage", "width",
                   "mean_lambda", "mean_c_gamma", "pr_comb", "replicates")


def strategy_of(name):
    """Strategia dei disturbi indicata dal suffisso (:B, :KH); default pseudo-ML + OLS(A u B)."""
    suffix = name.split(":")[1] if ":" in name else ""
    return {"B": Config.STRATEGY_PSEUDO_ML_OLS_B,
            "KH": Config.STRATEGY_KH}.get(suffix, Config.STRATEGY_PSEUDO_ML_OLS_AB)


class SimConfig:
    """
    Parametri di uno scenario Monte Carlo. I default dipendono dalla scala:
    'desk' (N=2e4, R=500, K=B=500, varianza plug-in) oppure 'full'
    (N=1e5, R=2000, K=B=2000, varianza bootstrap).
    """

    def __init__(self, b=0.0, scale=SCALE_DESK, N=None, target_nA=Config.SIM_TARGET_NA,
                 target_nB=Config.SIM_TARGET_NB, replicates=None, seed=0, estimators=ESTIMATORS,
                 intervals=DEFAULT_INTERVALS, variance=None, bootstrap_K=None, baci=None,
                 estimand=None, n_jobs=1):
        if scale not in (SCALE_DESK, SCALE_FULL):
            raise ConfigError(f"Scala sconosciuta: {scale}")
        full = scale == SCALE_FULL
        self.b = float(b)
        self.scale = scale
        self.N = int(N if N is not None else (Config.SIM_N_FULL if full else Config.SIM_N_DESK))
        self.target_nA = float(target_nA)
        self.target_nB = float(target_nB)
        self.replicates = int(replicates if replicates is not None
                              else (Config.SIM_R_FULL if full else Config.SIM_R_DESK))
        self.seed = int(seed)
        self.estimators = tuple(estimators)
        self.intervals = tuple(intervals)
        self.variance = variance or (Config.VARIANCE_BOOTSTRAP if full else Config.VARIANCE_PLUGIN)
        self.bootstrap_K = int(bootstrap_K if bootstrap_K is not None
                               else (Config.BOOTSTRAP_K_FULL if full else Config.BOOTSTRAP_K_DESK))
        self.baci = baci or BaciConfig(B=Config.BACI_B_FULL if full else Config.BACI_B_DESK, seed=self.seed)
        self.estimand = estimand or Estimand(Estimand.MEAN)
        self.n_jobs = int(n_jobs)
        self._validate()

    def _validate(self):
        if self.b < 0:
            raise ConfigError(f"Intensita' della violazione negativa: b={self.b}")
        if self.replicates < 0:
            raise ConfigError(f"Numero di replicazioni negativo: {self.replicates}")
        if self.target_nA <= 0 or self.target_nB <= 0:
            raise ConfigError("Le numerosita' obiettivo devono essere positive")
        if self.N < 10 * (self.target_nA + self.target_nB):
            raise ConfigError(f"Popolazione troppo piccola: N={self.N} < 10 x (n_A + n_B obiettivo)")
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown:
            raise ConfigError(f"Stimatori sconosciuti: {unknown}")
        unknown = [i for i in self.intervals if i not in INTERVALS]
        if unknown:
            raise ConfigError(f"Intervalli sconosciuti: {unknown}")
        if self.variance not in (Config.VARIANCE_BOOTSTRAP, Config.VARIANCE_PLUGIN):
            raise ConfigError(f"Metodo di varianza sconosciuto: {self.variance}")

    @property
    def strategies(self):
        """Strategie dei disturbi necessarie alla batteria richiesta (ordine stabile)."""
        needed = [strategy_of(e) for e in self.estimators if e not in ("A", "naive_B")]
        return tuple(dict.fromkeys(needed))

    def to_dict(self):
        return {"b": self.b, "scale": self.scale, "N": self.N, "target_nA": self.target_nA,
                "target_nB": self.target_nB, "replicates": self.replicates, "seed": self.seed,
                "estimators": list(self.estimators), "intervals": list(self.intervals),
                "variance": self.variance, "bootstrap_K": self.bootstrap_K}


class StudySummary:
    """
    Sintesi di uno scenario a partire dai record per replicazione:
    distorsione, varianza e MSE per stimatore (MSE = varianza + distorsione^2),
    copertura e ampiezza per intervallo, medie del tuning e pr(comb) per variante.
    """

    def __init__(self, b, records, failed=0):
        self.b = float(b)
        self.records = records
        self.failed = failed
        self.estimators = self._estimator_table()
        self.intervals = self._interval_table()
        self.tuning = self._tuning_table()

    def _names(self, prefix):
        return [c[len(prefix):] for c in self.records.columns if c.startswith(prefix)]

    def _estimator_table(self):
        rows = []
        truth = self.records["truth"].to_numpy()
        for name in self._names("est:"):
            err = self.records[f"est:{name}"].to_numpy() - truth
            bias = float(err.mean())
            variance = float(np.mean((err - bias) ** 2))
            rows.append({"name": name, "bias": bias, "variance": variance, "mse": variance + bias ** 2})
        return pd.DataFrame(rows, columns=["name", "bias", "variance", "mse"])

    def _interval_table(self):
        rows = []
        truth = self.records["truth"].to_numpy()
        for name in self._names("lower:"):
            lower = self.records[f"lower:{name}"].to_numpy()
            upper = self.records[f"upper:{name}"].to_numpy()
            rows.append({"name": name, "coverage": float(np.mean((lower <= truth) & (truth <= upper))),
                         "width": float(np.mean(upper - lower))})
        return pd.DataFrame(rows, columns=["name", "coverage", "width"])

    def _tuning_table(self):
        rows = []
        for name in self._names("pooled:"):
            rows.append({"name": name,
                         "mean_lambda": float(self.records[f"lambda:{name}"].mean()),
                         "mean_c_gamma": float(self.records[f"c_gamma:{name}"].mean()),
                         "pr_comb": float(self.records[f"pooled:{name}"].astype(float).mean())})
        return pd.DataFrame(rows, columns=["name", "mean_lambda", "mean_c_gamma", "pr_comb"])

    @property
    def replicates(self):
        return len(self.records)

    def table(self):
        """Tabella lunga con le colonne SUMMARY_COLUMNS, valori grezzi."""
        parts = [self.estimators.assign(kind="estimator"),
                 self.intervals.assign(kind="interval"),
                 self.tuning.assign(kind="tuning")]
        frame = pd.concat(parts, ignore_index=True, sort=False)
        frame["b"] = self.b
        frame["replicates"] = self.replicates
        return frame.reindex(columns=list(SUMMARY_COLUMNS))

    def to_csv(self, path):
        self.table().to_csv(path, index=False)
        logger.info("✅ Sintesi salvata in %s", path)

    def to_text(self):
        """Tabelle testuali con la convenzione x10^-3 per distorsione, varianza, MSE e ampiezza."""
        s = Config.SIM_DISPLAY_SCALE
        lines = [f"Scenario b={self.b:g} (R={self.replicates}, scartate {self.failed})",
                 f"{'stimatore':<10}{'bias':>10}{'var':>10}{'mse':>10}"]
        for row in self.estimators.itertuples():
            lines.append(f"{row.name:<10}{row.bias * s:>10.1f}{row.variance * s:>10.1f}{row.mse * s:>10.1f}")
        if len(self.intervals):
            lines.append(f"{'intervallo':<10}{'CR':>10}{'AL':>10}")
            for row in self.intervals.itertuples():
                lines.append(f"{row.name:<10}{row.coverage * 100:>10.1f}{row.width * s:>10.1f}")
        if len(self.tuning):
            lines.append(f"{'variante':<10}{'Lambda':>10}{'c_gamma':>10}{'pr(comb)':>10}")
            for row in self.tuning.itertuples():
                lines.append(f"{row.name:<10}{row.mean_lambda:>10.2f}{row.mean_c_gamma:>10.2f}"
                             f"{row.pr_comb:>10.2f}")
        return "\n".join(lines)
