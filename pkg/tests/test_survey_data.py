import json

import numpy as np
import pytest

from model.estimand import Estimand
from model.survey_data import CombinedData, DataSchema, load_samples
from utils.tap_errors import DimensionMismatchError, DomainError, MissingWeightError, ParseError


def _write(path, text):
    path.write_text(text)
    return str(path)


class TestCombinedData:
    @staticmethod
    def test_sizes_and_fraction() -> None:
        rng = np.random.default_rng(42)
        data = CombinedData.from_arrays(rng.normal(size=(40, 2)), rng.normal(size=40), np.full(40, 25.0),
                                        rng.normal(size=(60, 2)), rng.normal(size=60))
        assert (data.n_A, data.n_B, data.n) == (40, 60, 100)
        assert data.f_B == pytest.approx(0.6)
        assert data.p == 3
        assert data.N_hat == pytest.approx(1000.0)
        np.testing.assert_array_equal(data.prob.X[:, 0], np.ones(40))

    @staticmethod
    def test_stacked_layout() -> None:
        data = CombinedData.from_arrays(np.array([[1.0], [2.0]]), [1.0, 2.0], [3.0, 4.0],
                                        np.array([[5.0]]), [6.0])
        X, y, delta_A, delta_B, d = data.stacked()
        assert X.shape == (3, 2)
        np.testing.assert_array_equal(y, [1.0, 2.0, 6.0])
        np.testing.assert_array_equal(delta_A, [1.0, 1.0, 0.0])
        np.testing.assert_array_equal(delta_B, [0.0, 0.0, 1.0])
        np.testing.assert_array_equal(d, [3.0, 4.0, 0.0])

    @staticmethod
    def test_resample_keeps_sizes_and_weights() -> None:
        rng = np.random.default_rng(42)
        data = CombinedData.from_arrays(rng.normal(size=(30, 1)), rng.normal(size=30), np.arange(1.0, 31.0),
                                        rng.normal(size=(50, 1)), rng.normal(size=50))
        boot = data.resample(np.random.default_rng(1))
        assert (boot.n_A, boot.n_B) == (30, 50)
        assert set(boot.prob.d).issubset(set(data.prob.d))

    @staticmethod
    def test_rejects_inconsistent_inputs() -> None:
        with pytest.raises(DimensionMismatchError):
            CombinedData.from_arrays(np.ones((3, 2)), np.ones(3), np.ones(3), np.ones((3, 1)), np.ones(3))
        with pytest.raises(DomainError):
            CombinedData.from_arrays(np.ones((3, 1)), np.ones(3), [1.0, 0.0, 1.0], np.ones((3, 1)), np.ones(3))


class TestFinitePopulation:
    @staticmethod
    def test_mean_and_latent_hidden(sim_data) -> None:
        _, pop = sim_data
        X, y = pop.observed()
        assert X.shape == (pop.N, 3)
        assert pop.mu_g(Estimand(Estimand.MEAN))[0] == pytest.approx(y.mean())
        assert pop.latent().shape == (pop.N,)


class TestLoadSamples:
    @staticmethod
    def schema(tmp_path):
        path = tmp_path / "schema.json"
        path.write_text(json.dumps({"covariates": ["x"], "outcome": "y", "weight": "w"}))
        return DataSchema.from_json_file(str(path))

    @staticmethod
    def test_loads_both_samples(tmp_path) -> None:
        schema = TestLoadSamples.schema(tmp_path)
        prob = _write(tmp_path / "a.csv", "x,y,w\n1,2,10\n2,3,10\n3,5,20\n")
        nonprob = _write(tmp_path / "b.csv", "x,y\n1,1\n4,6\n")
        data = load_samples(prob, nonprob, schema)
        assert (data.n_A, data.n_B) == (3, 2)
        np.testing.assert_array_equal(data.prob.d, [10.0, 10.0, 20.0])
        np.testing.assert_array_equal(data.nonprob.X, [[1.0, 1.0], [1.0, 4.0]])

    @staticmethod
    def test_non_numeric_cell_reports_row_and_column(tmp_path) -> None:
        schema = TestLoadSamples.schema(tmp_path)
        prob = _write(tmp_path / "a.csv", "x,y,w\n1,2,10\n2,abc,10\n")
        nonprob = _write(tmp_path / "b.csv", "x,y\n1,1\n")
        with pytest.raises(ParseError) as info:
            load_samples(prob, nonprob, schema)
        assert info.value.row == 3
        assert info.value.column == "y"

    @staticmethod
    def test_missing_weight_column(tmp_path) -> None:
        schema = TestLoadSamples.schema(tmp_path)
        prob = _write(tmp_path / "a.csv", "x,y\n1,2\n")
        nonprob = _write(tmp_path / "b.csv", "x,y\n1,1\n")
        with pytest.raises(MissingWeightError):
            load_samples(prob, nonprob, schema)

    @staticmethod
    def test_non_positive_weight(tmp_path) -> None:
        schema = TestLoadSamples.schema(tmp_path)
        prob = _write(tmp_path / "a.csv", "x,y,w\n1,2,10\n2,3,0\n")
        nonprob = _write(tmp_path / "b.csv", "x,y\n1,1\n")
        with pytest.raises(ParseError) as info:
            load_samples(prob, nonprob, schema)
        assert info.value.column == "w"

    @staticmethod
    def test_missing_file_names_path(tmp_path) -> None:
        schema = TestLoadSamples.schema(tmp_path)
        missing = str(tmp_path / "nope.csv")
        with pytest.raises(FileNotFoundError, match="nope.csv"):
            load_samples(missing, missing, schema)

    @staticmethod
    def test_schema_errors(tmp_path) -> None:
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ValueError):
            DataSchema.from_json_file(str(bad))
        with pytest.raises(ParseError):
            DataSchema.from_dict({"outcome": "y"})
