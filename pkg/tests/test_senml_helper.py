import json

import numpy as np
import pytest

from conf.SystemConfiguration import SystemConfig as Config
from model.estimand import Estimand
from model.interval import PACI, Interval
from model.nuisance_fit import LINEAR, NuisanceFit
from model.tap_estimate import TapEstimate, TuningParams
from model.var_comps import VarComps
from utils.senml_helper import SenMLHelper
from utils.tap_errors import ParseError


def _tap():
    fit = NuisanceFit([-1.0, 0.2], [1.0, 0.5], Config.DEFAULT_STRATEGY, True, 7, LINEAR)
    return TapEstimate([3.1], 0.42, True, TuningParams(2.5, 4.0), [0.3], VarComps.toy(), [3.0], [3.2],
                       Config.DEFAULT_STRATEGY, Estimand(Estimand.MEAN), fit=fit)


class TestSenMLHelper:
    @staticmethod
    def test_pack_layout() -> None:
        pack = json.loads(SenMLHelper.create_pack("estimate", {"T": 1.5, "pooled": True, "M": [[1, 2], [3, 4]]}))
        assert pack[0] == {"bn": "urn:tap:estimate:", "bt": 0}
        assert {"n": "pooled", "vb": True} in pack
        assert {"n": "M/1/0", "v": 3.0} in pack

    @staticmethod
    def test_report_reconstructs_estimate() -> None:
        intervals = {"paci": Interval(2.9, 3.4, 0.95, PACI, {"grid_points": 41})}
        report = SenMLHelper.create_tap_report(_tap(), intervals, run={"seed": 3})
        assert SenMLHelper.validate_senml(report)
        values = SenMLHelper.values(SenMLHelper.parse_senml(report))
        assert values["ci/paci/upper"] == 3.4
        assert values["run/seed"] == 3.0

        again = TapEstimate.from_report(report)
        np.testing.assert_array_equal(again.point, [3.1])
        assert again.pooled and again.T == 0.42
        assert (again.tuning.Lambda, again.tuning.c_gamma) == (2.5, 4.0)
        np.testing.assert_allclose(again.varcomps.Sigma_T, VarComps.toy().Sigma_T)
        np.testing.assert_array_equal(again.fit.beta, [1.0, 0.5])
        assert again.estimand.kind == Estimand.MEAN

    @staticmethod
    def test_large_seed_survives_report() -> None:
        seed = 2 ** 53 + 1
        report = SenMLHelper.create_tap_report(_tap(), run={"seed": seed})
        assert {"n": "run/seed", "v": seed} in json.loads(report)
        values = SenMLHelper.values(SenMLHelper.parse_senml(report))
        assert int(values["run/seed"]) == seed
        assert isinstance(values["dropped"], int)

    @staticmethod
    def test_collect_rebuilds_matrix() -> None:
        values = {"M/0/0": 1.0, "M/0/1": 2.0, "M/1/0": 3.0, "M/1/1": 4.0, "MX": 9.0}
        np.testing.assert_array_equal(SenMLHelper.collect(values, "M"), [[1.0, 2.0], [3.0, 4.0]])
        with pytest.raises(ParseError):
            SenMLHelper.collect(values, "missing")

    @staticmethod
    def test_invalid_reports() -> None:
        for bad in ("not json", "[]", '[{"n": "x", "v": 1}]', '[{"bn": "a"}, {"n": "x"}]'):
            assert not SenMLHelper.validate_senml(bad)
            with pytest.raises(ParseError):
                SenMLHelper.parse_senml(bad)
