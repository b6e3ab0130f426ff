import json

import numpy as np
import pytest

from priopipe import supervised as supv


@pytest.fixture(scope="module")
def blob_xy():
    rng = np.random.default_rng(1)
    centers = rng.normal(scale=6.0, size=(4, 8))
    X = np.vstack([rng.normal(c, 0.8, size=(60, 8)) for c in centers])
    y = np.repeat(np.arange(4), 60)
    return X, y


class TestRandomForest:
    def test_linearly_separable_train_accuracy(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(-3, 1, (100, 2)), rng.normal(3, 1, (100, 2))])
        y = np.repeat([0, 1], 100)
        model = supv.train_random_forest(X, y, 100, seed=1)
        assert (model.predict(X) == y).mean() == 1.0

    def test_single_class_data_constant_predictor(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 4))
        y = np.full(30, 3)
        model = supv.train_random_forest(X, y, 10, seed=0, n_classes=5)
        assert (model.predict(X) == 3).all()

    def test_xor_shattered(self):
        X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 25, dtype=np.float64)
        y = np.array([0, 1, 1, 0] * 25)
        model = supv.train_random_forest(X, y, 30, seed=5)
        assert (model.predict(X) == y).mean() == 1.0

    def test_consistent_data_reaches_purity(self, blob_xy):
        X, y = blob_xy
        model = supv.train_random_forest(X, y, 25, seed=3)
        assert (model.predict(X) == y).mean() == 1.0

    def test_deterministic_given_seed(self, blob_xy):
        X, y = blob_xy
        a = supv.train_random_forest(X, y, 8, seed=11)
        b = supv.train_random_forest(X, y, 8, seed=11)
        assert np.array_equal(a.predict_logits(X), b.predict_logits(X))
        assert json.dumps(a.as_dict()) == json.dumps(b.as_dict())

    def test_single_pure_leaf_tree_one_hot(self):
        X = np.zeros((5, 3))
        y = np.full(5, 2)
        model = supv.train_random_forest(X, y, 1, seed=0, n_classes=4)
        logits = supv.predict_logits(model, X[0])
        assert list(logits) == [0.0, 0.0, 1.0, 0.0]

    def test_vote_fraction_logits_sum_to_one(self, blob_xy):
        X, y = blob_xy
        model = supv.train_random_forest(X, y, 15, seed=2)
        logits = model.predict_logits(X[:20])
        assert np.allclose(logits.sum(axis=1), 1.0)
        assert (logits >= 0).all()

    def test_json_round_trip(self, blob_xy):
        X, y = blob_xy
        model = supv.train_random_forest(X[:50], y[:50], 5, seed=7)
        clone = supv.RandomForestModel.from_dict(
            json.loads(json.dumps(model.as_dict()))
        )
        assert np.array_equal(model.predict_logits(X), clone.predict_logits(X))


class TestGradientBoosting:
    def test_log_loss_non_increasing_small_rate(self, blob_xy):
        X, y = blob_xy
        model = supv.train_gradient_boosting(
            X, y, 40, learning_rate=0.02, max_depth=2, seed=0
        )
        losses = model.train_log_loss_
        assert all(losses[i + 1] <= losses[i] + 1e-9 for i in range(len(losses) - 1))

    def test_blobs_train_accuracy(self, blob_xy):
        X, y = blob_xy
        model = supv.train_gradient_boosting(X, y, 100, max_depth=3, seed=0)
        assert (model.predict(X) == y).mean() >= 0.95

    def test_zero_estimators_uniform_logits_predict_zero(self, blob_xy):
        X, y = blob_xy
        model = supv.train_gradient_boosting(X, y, 0, seed=0)
        logits = model.predict_logits(X[:5])
        assert (logits == 0).all()
        assert (model.predict(X[:5]) == 0).all()

    def test_nonpositive_learning_rate_fatal(self):
        with pytest.raises(ValueError):
            supv.GradientBoostingModel(10, learning_rate=0.0)

    def test_logits_move_with_stage_leaf_values(self, blob_xy):
        # scaling a late stage's leaf payload shifts the affected class logit
        # in the same direction for points routed to that leaf
        X, y = blob_xy
        model = supv.train_gradient_boosting(X, y, 10, seed=0)
        base = model.predict_logits(X[:10])
        tree = model.stages[-1][1]
        bumped = [n for n in tree.nodes if n.value is not None]
        for leaf in bumped:
            leaf.value = leaf.value + 5.0
        del tree._is_leaf  # rebuild traversal cache
        shifted = model.predict_logits(X[:10])
        delta = shifted[:, 1] - base[:, 1]
        assert (delta > 0).all()
        assert np.allclose(delta, model.learning_rate * 5.0)

    def test_deterministic(self, blob_xy):
        X, y = blob_xy
        a = supv.train_gradient_boosting(X, y, 12, seed=4)
        b = supv.train_gradient_boosting(X, y, 12, seed=4)
        assert np.array_equal(a.predict_logits(X), b.predict_logits(X))

    def test_json_round_trip(self, blob_xy):
        X, y = blob_xy
        model = supv.train_gradient_boosting(X[:60], y[:60], 4, seed=2)
        clone = supv.GradientBoostingModel.from_dict(
            json.loads(json.dumps(model.as_dict()))
        )
        assert np.array_equal(model.predict_logits(X), clone.predict_logits(X))


class TestPredictContract:
    def test_argmax_of_logits_equals_predict(self, blob_xy):
        X, y = blob_xy
        rng = np.random.default_rng(3)
        probe = rng.normal(size=(1000, X.shape[1]))
        for model in (
            supv.train_random_forest(X, y, 10, seed=1),
            supv.train_gradient_boosting(X, y, 10, seed=1),
        ):
            logits = model.predict_logits(probe)
            assert np.array_equal(logits.argmax(axis=1), model.predict(probe))

    def test_logits_finite_and_in_range(self, blob_xy):
        X, y = blob_xy
        for model in (
            supv.train_random_forest(X, y, 10, seed=1),
            supv.train_gradient_boosting(X, y, 10, seed=1),
        ):
            logits = model.predict_logits(X)
            assert np.isfinite(logits).all()
            assert logits.shape[1] == 4
            preds = model.predict(X)
            assert preds.min() >= 0 and preds.max() < 4

    def test_single_sample_helpers(self, blob_xy):
        X, y = blob_xy
        model = supv.train_random_forest(X, y, 5, seed=0)
        logits = supv.predict_logits(model, X[0])
        assert logits.shape == (4,)
        assert supv.predict(model, X[0]) == int(logits.argmax())
