import logging
import os
import sys

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from conf.SystemConfiguration import SystemConfig as Config
from model.run_descriptor import RunDescriptor
from model.sim_config import StudySummary
from model.simulation_logic import SimulationLogic
from utils.tap_errors import EmptyStudyError, ReplicateFailureError, TapError

logger = logging.getLogger(__name__)


class StudyRunner:
    """
    Esegue le R replicazioni di uno scenario e ne produce la sintesi.
    Le replicazioni fallite sono registrate e scartate; oltre il 2% lo studio fallisce.
    """

    def __init__(self, config):
        self.config = config

    def _safe_replicate(self, index):
        try:
            return SimulationLogic.run_replicate(self.config, index)
        except (TapError, np.linalg.LinAlgError) as e:
            logger.warning("⚠️ Replicazione %d scartata: %s", index, e)
            return None

    def run(self):
        config = self.config
        if config.replicates == 0:
            raise EmptyStudyError("Studio senza replicazioni (R = 0)")
        logger.info("🚀 Scenario b=%g: %d replicazioni, N=%d, scala %s", config.b, config.replicates,
                    config.N, config.scale)
        results = Parallel(n_jobs=config.n_jobs, prefer="threads")(
            delayed(self._safe_replicate)(r) for r in range(config.replicates)
        )
        records = [r for r in results if r is not None]
        failed = config.replicates - len(records)
        if failed > Config.REPLICATE_FAILURE_MAX * config.replicates:
            raise ReplicateFailureError(failed, config.replicates, Config.REPLICATE_FAILURE_MAX)
        frame = pd.DataFrame(records).sort_values("replicate").reset_index(drop=True)
        summary = StudySummary(config.b, frame, failed=failed)
        logger.info("✅ Scenario b=%g completato (%d scartate)", config.b, failed)
        return summary

    @staticmethod
    def write_outputs(summary, out_dir):
        """summary_b<b>.csv, replicates_b<b>.csv e summary_b<b>.txt nella cartella indicata."""
        os.makedirs(out_dir, exist_ok=True)
        tag = f"b{summary.b:g}"
        summary.to_csv(os.path.join(out_dir, f"summary_{tag}.csv"))
        summary.records.to_csv(os.path.join(out_dir, f"replicates_{tag}.csv"), index=False)
        with open(os.path.join(out_dir, f"summary_{tag}.txt"), "w") as f:
            f.write(summary.to_text() + "\n")


def run_study(config):
    return StudyRunner(config).run()


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    CONFIG_FILE_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'conf',
                                    'run_config.json')

    try:
        descriptor = RunDescriptor.from_json_file(CONFIG_FILE_PATH)
    except (FileNotFoundError, ValueError) as e:
        logger.error("❌ Errore di caricamento o parsing della configurazione: %s", e)
        sys.exit(1)

    out_dir = descriptor["run"]["out"] or "results"
    for b in Config.SIM_B_VALUES:
        try:
            summary = run_study(descriptor.with_overrides(**{"sim.b": b}).to_sim_config())
        except TapError as e:
            logger.error("❌ Scenario b=%g fallito: %s", b, e)
            sys.exit(1)
        StudyRunner.write_outputs(summary, out_dir)
        print(summary.to_text())
