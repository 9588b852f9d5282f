import logging
import os
import sys

import numpy as np
import pandas as pd

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from conf.SystemConfiguration import SystemConfig as Config
from model.tap_estimate import TuningParams
from model.tap_logic import MseSurface
from model.var_comps import VarComps
from utils.tap_errors import ConfigError

logger = logging.getLogger(__name__)

TOY_COLUMNS = ["lambda", "c_gamma", "eta", "bias", "mse"]


class ToyGrid:
    """Griglia (Lambda, c_gamma) x eta per la superficie dell'esempio giocattolo."""

    def __init__(self, lambda_max=Config.TOY_LAMBDA_MAX, c_max=Config.TOY_C_MAX,
                 points=Config.TOY_GRID_POINTS, etas=Config.TOY_ETAS):
        if lambda_max <= 0 or c_max <= 0:
            raise ConfigError(f"Estremi della griglia non positivi: Lambda_max={lambda_max}, c_max={c_max}")
        if int(points) < 2:
            raise ConfigError(f"Servono almeno 2 punti per asse, non {points}")
        if not etas:
            raise ConfigError("Nessun valore di eta richiesto")
        self.lambdas = np.linspace(0.0, float(lambda_max), int(points))
        self.c_values = np.linspace(0.0, float(c_max), int(points))
        self.etas = tuple(float(e) for e in etas)


def toy_surface(grid=None, varcomps=None):
    """
    Tabella (lambda, c_gamma, eta, bias, mse) della superficie analitica sulle
    componenti giocattolo (V_A=2, V_B=1, Gamma=0.5), un blocco per eta.
    """
    grid = grid or ToyGrid()
    varcomps = varcomps or VarComps.toy()
    rows = []
    for eta in grid.etas:
        surface = MseSurface([eta], varcomps)
        for lam in grid.lambdas:
            for c in grid.c_values:
                bias, mse = surface.evaluate(lam, c)
                rows.append((lam, c, eta, float(bias[0]), float(mse[0, 0])))
    frame = pd.DataFrame(rows, columns=TOY_COLUMNS)
    logger.info("Superficie giocattolo: %d punti per %d valori di eta", len(frame) // len(grid.etas),
                len(grid.etas))
    return frame


def optimum_by_eta(frame):
    """Minimo della griglia per ciascun eta."""
    idx = frame.groupby("eta")["mse"].idxmin()
    best = frame.loc[idx]
    return {float(e): TuningParams(lam, c) for e, lam, c in zip(best["eta"], best["lambda"], best["c_gamma"])}


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    out_path = sys.argv[1] if len(sys.argv) > 1 else "toy_surface.csv"
    table = toy_surface()
    table.to_csv(out_path, index=False)
    for eta, tuning in optimum_by_eta(table).items():
        logger.info("eta=%g: minimo della griglia in %s", eta, tuning)
    logger.info("✅ Superficie salvata in %s", out_path)
