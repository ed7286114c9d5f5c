"""Model container round-trips must be exact."""

import json

import numpy as np
import pytest

from density_softmax.data import make_two_moons
from density_softmax.density import FlowConfig
from density_softmax.model import (EncoderConfig, TrainConfig, ensemble_train,
                                   init_model)
from density_softmax.optim import OptimizerSpec
from density_softmax.predictor import DensityConfig, ReoptConfig, train_pipeline
from density_softmax.serialize import (ContainerError, ErmModel,
                                       density_softmax_container,
                                       ensemble_container, erm_container,
                                       load_container, save_container)

SMALL = EncoderConfig(input_dim=2, width=8, depth=2, latent_dim=8)
FAST = TrainConfig(epochs=5, batch_size=64,
                   optimizer=OptimizerSpec(kind="adam", lr=3e-3), seed=0)


@pytest.fixture(scope="module")
def pipeline_result():
    train = make_two_moons(80, 0.1, seed=0)
    return train, train_pipeline(train, SMALL, FAST, DensityConfig(kind="kde"),
                                 ReoptConfig(epochs=2, batch_size=64, seed=0))


class TestDensitySoftmaxContainer:
    def test_round_trip_predictions_bitwise(self, tmp_path, pipeline_result):
        train, result = pipeline_result
        path = tmp_path / "model.json"
        save_container(density_softmax_container(result.model), path)
        back = load_container(path)
        x = train.features[:20]
        np.testing.assert_array_equal(back.predict(x).probs,
                                      result.model.predict(x).probs)
        assert back.density.max_train_log_density == \
            result.model.density.max_train_log_density

    def test_version_field_required(self, tmp_path, pipeline_result):
        _, result = pipeline_result
        doc = density_softmax_container(result.model)
        del doc["version"]
        path = tmp_path / "noversion.json"
        with open(path, "w") as fh:
            json.dump(doc, fh)
        with pytest.raises(ContainerError, match="version"):
            load_container(path)

    def test_unknown_kind_rejected(self, tmp_path):
        path = tmp_path / "weird.json"
        path.write_text('{"version": 1, "kind": "mystery"}')
        with pytest.raises(ContainerError, match="kind"):
            load_container(path)

    def test_flow_density_round_trip(self, tmp_path):
        train = make_two_moons(130, 0.1, seed=1)
        result = train_pipeline(
            train, SMALL, FAST,
            DensityConfig(kind="flow", flow=FlowConfig(epochs=3, batch_size=128,
                                                       coupling_layers=2)),
            ReoptConfig(epochs=1, batch_size=64, seed=0))
        path = tmp_path / "flow_model.json"
        save_container(density_softmax_container(result.model), path)
        back = load_container(path)
        x = train.features[:10]
        np.testing.assert_array_equal(back.predict(x).probs,
                                      result.model.predict(x).probs)


class TestErmAndEnsembleContainers:
    def test_erm_round_trip(self, tmp_path, pipeline_result):
        train, result = pipeline_result
        erm = ErmModel(result.model.encoder, result.erm_classifier)
        path = tmp_path / "erm.json"
        save_container(erm_container(erm.encoder, erm.classifier), path)
        back = load_container(path)
        x = train.features[:20]
        np.testing.assert_array_equal(back.predict_probs(x), erm.predict_probs(x))

    def test_ensemble_round_trip(self, tmp_path):
        train = make_two_moons(40, 0.1, seed=0)
        ens = ensemble_train(2, SMALL, 2, train, FAST)
        path = tmp_path / "ens.json"
        save_container(ensemble_container(ens), path)
        back = load_container(path)
        x = train.features[:10]
        np.testing.assert_array_equal(back.predict_probs(x), ens.predict_probs(x))
        assert back.param_count() == ens.param_count()

    def test_save_is_deterministic(self, tmp_path, pipeline_result):
        _, result = pipeline_result
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_container(density_softmax_container(result.model), p1)
        save_container(density_softmax_container(result.model), p2)
        assert p1.read_bytes() == p2.read_bytes()
