import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from model.sim_config import SimConfig
from model.simulation_logic import SimulationLogic
from model.var_comps import VarComps


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def toy_varcomps():
    return VarComps.toy()


@pytest.fixture
def small_config():
    return SimConfig(b=0.0, N=20000, target_nA=300, target_nB=1500, replicates=4, seed=7,
                     bootstrap_K=60)


@pytest.fixture
def sim_data(small_config):
    """Campioni A e B estratti dalla popolazione sintetica (b = 0)."""
    rng = np.random.default_rng(42)
    pop = SimulationLogic.generate_population(small_config, rng)
    return SimulationLogic.draw_samples(pop, small_config, rng), pop
