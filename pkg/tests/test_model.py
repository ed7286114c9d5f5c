"""Encoder/classifier construction, ERM training, ensembles."""

import numpy as np
import pytest

from density_softmax.data import make_two_moons, make_two_ovals
from density_softmax.model import (Classifier, EncoderConfig, Ensemble,
                                   TrainConfig, TrainingDiverged,
                                   ensemble_train, erm_train, init_model,
                                   param_count, predict_probs)
from density_softmax.optim import OptimizerSpec

SMALL = EncoderConfig(input_dim=2, width=8, depth=2, latent_dim=8)


def small_train_config(epochs=30, lr=3e-3, seed=0, **kw):
    return TrainConfig(epochs=epochs, batch_size=64,
                       optimizer=OptimizerSpec(kind="adam", lr=lr), seed=seed, **kw)


class TestInitModel:
    def test_same_seed_identical_weights(self):
        e1, c1 = init_model(SMALL, 2, seed=5)
        e2, c2 = init_model(SMALL, 2, seed=5)
        for p1, p2 in zip(e1.params() + c1.params(), e2.params() + c2.params()):
            np.testing.assert_array_equal(p1.data, p2.data)

    def test_different_seed_differs(self):
        e1, _ = init_model(SMALL, 2, seed=5)
        e2, _ = init_model(SMALL, 2, seed=6)
        assert not np.array_equal(e1.params()[0].data, e2.params()[0].data)

    def test_width_latent_mismatch_rejected(self):
        with pytest.raises(ValueError):
            EncoderConfig(input_dim=2, width=8, depth=1, latent_dim=16)

    def test_param_count_formula(self):
        d_x, w, depth, k = 2, 4, 1, 2
        cfg = EncoderConfig(input_dim=d_x, width=w, depth=depth, latent_dim=w)
        enc, clf = init_model(cfg, k, seed=0)
        expected = d_x * w + w + depth * (w * w + w) + w * k
        assert param_count(enc, clf) == expected
        # and the formula agrees with direct enumeration over tensors
        total = sum(p.data.size for p in enc.params() + clf.params())
        assert total == expected

    def test_classifier_has_no_bias(self):
        _, clf = init_model(SMALL, 3, seed=0)
        assert clf.params() == [clf.theta]
        assert clf.theta.data.shape == (8, 3)


class TestEncode:
    def test_row_independence(self, rng):
        # batch-of-one agrees with the batch row (BLAS may round differently
        # across batch shapes, hence the tolerance)...
        enc, _ = init_model(SMALL, 2, seed=1)
        x = rng.normal(size=(10, 2))
        batch = enc.encode(x)
        for i in range(10):
            np.testing.assert_allclose(enc.encode(x[i]), batch[i],
                                       rtol=1e-12, atol=1e-14)
        # ...and changing other rows leaves row i bit-identical
        x2 = x.copy()
        x2[1:] = rng.normal(size=(9, 2))
        np.testing.assert_array_equal(enc.encode(x2)[0], batch[0])

    def test_dimension_mismatch(self, rng):
        enc, _ = init_model(SMALL, 2, seed=1)
        with pytest.raises(ValueError):
            enc.encode(rng.normal(size=(4, 3)))

    def test_zero_weight_encoder_maps_to_zero(self):
        enc, _ = init_model(SMALL, 2, seed=1)
        for p in enc.params():
            p.data[...] = 0.0
        out = enc.encode(np.array([[1.0, -2.0]]))
        np.testing.assert_array_equal(out, np.zeros((1, 8)))

    def test_eval_count_tracks_rows(self, rng):
        enc, _ = init_model(SMALL, 2, seed=1)
        assert enc.eval_count == 0
        enc.encode(rng.normal(size=(7, 2)))
        assert enc.eval_count == 7
        enc.encode(rng.normal(size=2))
        assert enc.eval_count == 8


class TestLogits:
    def test_zero_theta_gives_uniform_softmax(self):
        from density_softmax.ops import softmax

        clf = Classifier.__new__(Classifier)
        from density_softmax.autodiff import Tensor

        clf.theta = Tensor(np.zeros((4, 3)))
        probs = softmax(clf.logits(np.ones((2, 4))))
        np.testing.assert_allclose(probs, np.full((2, 3), 1 / 3), atol=1e-15)

    def test_identity_weights(self):
        from density_softmax.autodiff import Tensor

        clf = Classifier(Tensor(np.eye(2)))
        np.testing.assert_array_equal(clf.logits(np.array([3.0, 4.0])), [3.0, 4.0])

    def test_dim_mismatch(self):
        from density_softmax.autodiff import Tensor

        clf = Classifier(Tensor(np.zeros((4, 2))))
        with pytest.raises(ValueError):
            clf.logits(np.zeros((1, 5)))


class TestErmTrain:
    def test_zero_epochs_leaves_parameters(self):
        train = make_two_moons(50, 0.1, seed=0)
        enc, clf = init_model(SMALL, 2, seed=0)
        before = [p.data.copy() for p in enc.params() + clf.params()]
        trace = erm_train(enc, clf, train, small_train_config(epochs=0))
        assert trace == []
        for p, b in zip(enc.params() + clf.params(), before):
            np.testing.assert_array_equal(p.data, b)

    def test_loss_decreases(self):
        train = make_two_moons(100, 0.1, seed=0)
        enc, clf = init_model(SMALL, 2, seed=0)
        trace = erm_train(enc, clf, train, small_train_config())
        assert trace[-1] < trace[0]

    def test_separable_ovals_reach_high_accuracy(self):
        train = make_two_ovals(100, 4.0, 0.05, seed=0)
        enc, clf = init_model(SMALL, 2, seed=0)
        erm_train(enc, clf, train, small_train_config(epochs=60))
        probs = predict_probs(enc, clf, train.features)
        acc = (probs.argmax(axis=1) == train.labels).mean()
        assert acc >= 0.99

    def test_deterministic_per_seed(self):
        train = make_two_moons(60, 0.1, seed=0)
        results = []
        for _ in range(2):
            enc, clf = init_model(SMALL, 2, seed=3)
            erm_train(enc, clf, train, small_train_config(epochs=5, seed=3))
            results.append(np.concatenate([p.data.ravel()
                                           for p in enc.params() + clf.params()]))
        np.testing.assert_array_equal(results[0], results[1])

    def test_shifted_set_rejected(self):
        from density_softmax.data import DataError, ShiftSpec, apply_shift

        iid = make_two_moons(20, 0.1, seed=0, domain="iid_test")
        shifted = apply_shift(iid, ShiftSpec(), 1, seed=0)
        enc, clf = init_model(SMALL, 2, seed=0)
        with pytest.raises(DataError):
            erm_train(enc, clf, shifted, small_train_config(epochs=1))

    def test_divergence_raises(self):
        train = make_two_moons(50, 0.1, seed=0)
        enc, clf = init_model(SMALL, 2, seed=0)
        cfg = TrainConfig(epochs=200, batch_size=32,
                          optimizer=OptimizerSpec(kind="sgd_momentum", lr=1e9),
                          seed=0)
        with np.errstate(all="ignore"), pytest.raises(TrainingDiverged):
            erm_train(enc, clf, train, cfg)

    def test_lr_schedule(self):
        cfg = TrainConfig(epochs=10, batch_size=8,
                          optimizer=OptimizerSpec(kind="adam", lr=1.0),
                          lr_decay_epochs=(3, 6), lr_decay_ratio=0.1, seed=0)
        assert cfg.lr_at(0) == 1.0
        assert cfg.lr_at(3) == pytest.approx(0.1)
        assert cfg.lr_at(6) == pytest.approx(0.01)


class TestEnsemble:
    def test_requires_two_members(self):
        train = make_two_moons(30, 0.1, seed=0)
        with pytest.raises(ValueError):
            ensemble_train(1, SMALL, 2, train, small_train_config(epochs=1))

    def test_mean_of_simplex_stays_on_simplex(self):
        train = make_two_moons(30, 0.1, seed=0)
        ens = ensemble_train(2, SMALL, 2, train, small_train_config(epochs=3))
        probs = ens.predict_probs(train.features[:10])
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_identical_members_equal_single_model(self):
        train = make_two_moons(30, 0.1, seed=0)
        enc, clf = init_model(SMALL, 2, seed=4)
        erm_train(enc, clf, train, small_train_config(epochs=3, seed=4))
        ens = Ensemble([(enc, clf), (enc, clf)])
        single = predict_probs(enc, clf, train.features[:5])
        np.testing.assert_array_equal(ens.predict_probs(train.features[:5]), single)

    def test_param_count_additivity(self):
        train = make_two_moons(30, 0.1, seed=0)
        ens = ensemble_train(2, SMALL, 2, train, small_train_config(epochs=1))
        single = param_count(*ens.members[0])
        assert ens.param_count() == 2 * single
