import math
import os

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from model.sim_config import SUMMARY_COLUMNS, SimConfig
from model.simulation_logic import SimulationLogic
from process.study_runner import StudyRunner, run_study
from utils.tap_errors import EmptyStudyError, ReplicateFailureError


def _config(**kwargs):
    base = dict(b=0.5, N=20000, target_nA=300, target_nB=1500, replicates=3, seed=11,
                estimators=("A", "bc", "tap"), intervals=("wald",))
    base.update(kwargs)
    return SimConfig(**base)


class TestStudyRunner:
    @staticmethod
    def test_empty_study() -> None:
        with pytest.raises(EmptyStudyError):
            run_study(_config(replicates=0))

    @staticmethod
    def test_small_study() -> None:
        summary = run_study(_config())
        assert summary.replicates == 3
        assert summary.failed == 0
        assert set(summary.estimators["name"]) == {"A", "bc", "tap"}
        assert list(summary.records["replicate"]) == [0, 1, 2]

    @staticmethod
    def test_threads_do_not_change_results() -> None:
        one = run_study(_config(n_jobs=1))
        two = run_study(_config(n_jobs=3))
        pd.testing.assert_frame_equal(one.records, two.records)

    @staticmethod
    def test_linear_algebra_failures_count_as_dropped(monkeypatch) -> None:
        broken = {7}

        def replicate(config, index):
            if index in broken:
                raise np.linalg.LinAlgError("Singular matrix")
            return {"replicate": index, "truth": 1.0, "est:A": 1.0 + 0.01 * index}

        monkeypatch.setattr(SimulationLogic, "run_replicate", staticmethod(replicate))
        config = _config(replicates=60)
        summary = StudyRunner(config).run()
        assert summary.failed == 1
        assert 7 not in set(summary.records["replicate"])
        broken.add(3)
        with pytest.raises(ReplicateFailureError):
            StudyRunner(config).run()

    @staticmethod
    def test_write_outputs(tmp_path) -> None:
        summary = run_study(_config(replicates=2))
        StudyRunner.write_outputs(summary, str(tmp_path))
        assert sorted(os.listdir(tmp_path)) == ["replicates_b0.5.csv", "summary_b0.5.csv", "summary_b0.5.txt"]
        table = pd.read_csv(tmp_path / "summary_b0.5.csv")
        assert list(table.columns) == list(SUMMARY_COLUMNS)

    @staticmethod
    @pytest.mark.slow
    def test_null_scenario_acceptance() -> None:
        summary = run_study(_config(b=0.0, replicates=200, estimators=("A", "eff", "tap"),
                                    intervals=("wald", "baci-f", "paci"), n_jobs=4))
        mse = summary.estimators.set_index("name")["mse"]
        assert mse["tap"] < mse["A"]
        coverage = summary.intervals.set_index("name")["coverage"]
        for name in ("wald:A", "baci-f", "paci"):
            assert coverage[name] >= 0.90


def _desk(b, replicates, estimators, intervals, seed=20240517):
    return SimConfig(b=b, replicates=replicates, seed=seed, estimators=estimators, intervals=intervals, n_jobs=4)


class TestDeskScaleStudy:
    @staticmethod
    @pytest.mark.slow
    def test_null_statistic_is_chi_square() -> None:
        summary = run_study(_desk(0.0, 2000, ("tap",), ("wald",)))
        T = summary.records["T:tap"].to_numpy()
        assert stats.kstest(T, "chi2", args=(1,)).pvalue > 0.01

    @staticmethod
    @pytest.mark.slow
    def test_violation_scenarios() -> None:
        summaries = {b: run_study(_desk(b, 500, ("A", "bc", "tap"), ("wald",)))
                     for b in (0.0, 10.0, 100.0)}
        pr_comb = []
        for b, summary in summaries.items():
            est = summary.estimators.set_index("name")
            # mu_A non distorto entro 3 errori Monte Carlo
            assert abs(est.loc["A", "bias"]) <= 3.0 * math.sqrt(est.loc["A", "variance"] / summary.replicates)
            pr_comb.append(summary.tuning.set_index("name").loc["tap", "pr_comb"])

        null = summaries[0.0].estimators.set_index("name")["mse"]
        assert 0.55 <= null["tap"] / null["A"] <= 0.95
        strong = summaries[100.0].estimators.set_index("name")
        assert strong.loc["bc", "bias"] > 0.5
        assert 0.9 <= strong.loc["tap", "mse"] / strong.loc["A", "mse"] <= 1.1
        assert pr_comb[0] >= pr_comb[1] >= pr_comb[2]
        assert pr_comb[2] < 0.05

    @staticmethod
    @pytest.mark.slow
    @pytest.mark.parametrize("b", [0.0, 100.0])
    def test_adaptive_interval_coverage(b) -> None:
        summary = run_study(_desk(b, 300, ("A", "tap"), ("wald", "baci-f", "paci")))
        intervals = summary.intervals.set_index("name")
        assert 0.90 <= intervals.loc["baci-f", "coverage"] <= 0.98
        assert intervals.loc["paci", "coverage"] >= intervals.loc["baci-f", "coverage"]
        if b == 100.0:
            wald_width = intervals.loc["wald:A", "width"]
            assert abs(intervals.loc["baci-f", "width"] - wald_width) <= 0.05 * wald_width

        records = summary.records
        contains = (records["lower:paci"] <= records["lower:baci-f"]) & \
                   (records["upper:paci"] >= records["upper:baci-f"])
        assert contains.mean() >= 0.90
