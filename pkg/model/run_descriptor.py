import copy
import json
import logging

from conf.SystemConfiguration import SystemConfig as Config
from model.estimand import Estimand
from model.interval import BaciConfig
from model.sim_config import SCALE_DESK, SCALE_FULL, SimConfig
from model.tap_estimate import TapOptions
from utils.tap_errors import ConfigError

logger = logging.getLogger(__name__)

# Sezioni ammesse e relative chiavi con i valori di default
SECTIONS = {
    "data": {"prob": None, "nonprob": None, "schema": None},
    "estimand": {"kind": Estimand.MEAN, "cutoff": None},
    "nuisance": {"strategy": Config.DEFAULT_STRATEGY},
    "estimators": {"variance": Config.VARIANCE_BOOTSTRAP, "bootstrap_K": Config.BOOTSTRAP_K_DESK,
                   "refit_nuisance": True},
    "tap": {"fix_c": False, "force_lambda": None, "force_c_gamma": None, "lambda_max": Config.LAMBDA_MAX,
            "c_max": Config.C_GAMMA_MAX, "restarts": Config.NM_RESTARTS},
    "ci": {"methods": ["wald", "baci-f", "paci"], "alpha": Config.CI_ALPHA, "epsilon": Config.CI_EPSILON,
           "vn_mode": Config.VN_FIXED, "kappa_grid": list(Config.KAPPA_GRID), "B": Config.BACI_B_DESK,
           "B1": Config.DOUBLE_B1, "B2": Config.DOUBLE_B2, "budget_max": Config.DOUBLE_BUDGET_MAX,
           "mu2_half_width": Config.MU2_GRID_HALF_WIDTH, "mu2_step": Config.MU2_GRID_STEP,
           "contrast": None, "paci_draws": Config.PACI_DRAWS, "paci_grid_points": Config.PACI_GRID_POINTS},
    "sim": {"b": 0.0, "scale": SCALE_DESK, "N": None, "target_nA": Config.SIM_TARGET_NA,
            "target_nB": Config.SIM_TARGET_NB, "replicates": None, "variance": None, "bootstrap_K": None,
            "estimators": None, "intervals": None},
    "toy": {"lambda_max": Config.TOY_LAMBDA_MAX, "c_max": Config.TOY_C_MAX,
            "points": Config.TOY_GRID_POINTS, "etas": list(Config.TOY_ETAS)},
    "run": {"seed": 0, "threads": 1, "out": None},
}


class RunDescriptor:
    """
    Manifesto di un'esecuzione: un oggetto JSON per sezione. Chiavi o sezioni
    sconosciute sono rifiutate; i flag della riga di comando sovrascrivono i
    valori del file.
    """

    def __init__(self, sections=None):
        self.sections = copy.deepcopy(SECTIONS)
        for name, values in (sections or {}).items():
            self._merge(name, values)

    def _merge(self, name, values):
        if name not in SECTIONS:
            raise ConfigError(f"Sezione sconosciuta: '{name}' (ammesse: {', '.join(SECTIONS)})")
        if not isinstance(values, dict):
            raise ConfigError(f"La sezione '{name}' deve essere un oggetto")
        unknown = [k for k in values if k not in SECTIONS[name]]
        if unknown:
            raise ConfigError(f"Chiavi sconosciute nella sezione '{name}': {unknown}")
        self.sections[name].update(values)

    @classmethod
    def from_json_file(cls, file_path):
        try:
            with open(file_path, "r") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise FileNotFoundError(f"File di configurazione non trovato a: {file_path}")
        except json.JSONDecodeError as e:
            raise ValueError(f"Errore nel parsing del JSON di configurazione: {e}")
        if not isinstance(data, dict):
            raise ConfigError("Il manifesto deve essere un oggetto JSON")
        descriptor = cls(data)
        logger.info("✅ Configurazione caricata da %s", file_path)
        return descriptor

    def with_overrides(self, **overrides):
        """Copia con valori sovrascritti; le chiavi sono 'sezione.chiave', i None sono ignorati."""
        other = RunDescriptor(copy.deepcopy(self.sections))
        for dotted, value in overrides.items():
            if value is None:
                continue
            section, _, key = dotted.partition(".")
            other._merge(section, {key: value})
        return other

    def __getitem__(self, section):
        return self.sections[section]

    @property
    def seed(self):
        return int(self.sections["run"]["seed"])

    @property
    def threads(self):
        return int(self.sections["run"]["threads"])

    def to_estimand(self):
        s = self.sections["estimand"]
        return Estimand(s["kind"], s["cutoff"])

    def to_tap_options(self):
        est, tap = self.sections["estimators"], self.sections["tap"]
        return TapOptions(variance=est["variance"], bootstrap_K=est["bootstrap_K"],
                          refit_nuisance=est["refit_nuisance"], fix_c=tap["fix_c"],
                          force_lambda=tap["force_lambda"], force_c_gamma=tap["force_c_gamma"],
                          lambda_max=tap["lambda_max"], c_max=tap["c_max"], restarts=tap["restarts"],
                          seed=self.seed, n_jobs=self.threads)

    def to_baci_config(self, B=None):
        ci = self.sections["ci"]
        return BaciConfig(alpha=ci["alpha"], epsilon=ci["epsilon"], vn_mode=ci["vn_mode"],
                          kappa_grid=ci["kappa_grid"], B=B if B is not None else ci["B"], B1=ci["B1"],
                          B2=ci["B2"], budget_max=ci["budget_max"], mu2_half_width=ci["mu2_half_width"],
                          mu2_step=ci["mu2_step"], contrast=ci["contrast"], paci_draws=ci["paci_draws"],
                          paci_grid_points=ci["paci_grid_points"],
                          refit_nuisance=self.sections["estimators"]["refit_nuisance"],
                          seed=self.seed, n_jobs=self.threads)

    def to_sim_config(self):
        sim = self.sections["sim"]
        full = sim["scale"] == SCALE_FULL
        baci = self.to_baci_config(B=Config.BACI_B_FULL if full and self.sections["ci"]["B"] == Config.BACI_B_DESK
                                   else None)
        optional = {k: sim[k] for k in ("N", "replicates", "variance", "bootstrap_K", "estimators", "intervals")
                    if sim[k] is not None}
        return SimConfig(b=sim["b"], scale=sim["scale"], target_nA=sim["target_nA"], target_nB=sim["target_nB"],
                         seed=self.seed, baci=baci, estimand=self.to_estimand(), n_jobs=self.threads, **optional)

    def to_dict(self):
        return copy.deepcopy(self.sections)
