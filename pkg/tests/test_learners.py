import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsmas.errors import ConfigError, NumericError
from gsmas.features import Standardizer
from gsmas.learners import (DecisionTree, MlpModel, TrainedModel, cross_entropy_loss, dt_predict, dt_train,
                            entropy, gradient_check, information_gain, load_model, mlp_forward, mlp_predict,
                            mlp_train, save_model)
from gsmas.learners.mlp import init_model, loss_and_grads


def small_model(seed, sizes=(5, 4, 3, 4)):
    return init_model(list(sizes), np.random.default_rng(seed))


class TestEntropy:
    def test_pure(self):
        assert entropy([9, 0, 0, 0]) == 0.0

    def test_uniform_eight(self):
        assert entropy([5] * 8) == 3.0

    def test_two_by_two(self):
        assert entropy([2, 2]) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            entropy([0, 0])

    @given(st.lists(st.integers(0, 50), min_size=2, max_size=10).filter(lambda c: sum(c) > 0))
    def test_bounds(self, counts):
        h = entropy(counts)
        assert -1e-12 <= h <= math.log2(len(counts)) + 1e-12


class TestGain:
    def test_pure_children(self):
        assert information_gain([4, 4], [[4, 0], [0, 4]]) == pytest.approx(1.0)

    def test_uninformative(self):
        assert information_gain([4, 4], [[2, 2], [2, 2]]) == pytest.approx(0.0, abs=1e-15)

    def test_hand_example(self):
        assert information_gain([3, 3], [[3, 1], [0, 2]]) == pytest.approx(0.4591, abs=1e-4)

    def test_partition_violation(self):
        with pytest.raises(ValueError):
            information_gain([3, 3], [[3, 1], [1, 2]])

    @given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=2, max_size=6))
    def test_nonnegative(self, pairs):
        left = np.array([a for a, _ in pairs])
        right = np.array([b for _, b in pairs])
        parent = left + right
        if parent.sum() == 0:
            return
        assert information_gain(parent, [left, right]) >= -1e-12


class TestTree:
    def test_separable_one_feature(self):
        x = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 1, 1])
        tree = dt_train(x, y, 2)
        assert tree.tree_depth == 1 and tree.threshold[0] == 1.5
        assert np.array_equal(dt_predict(tree, x), y)

    def test_identical_features_single_leaf(self):
        tree = dt_train(np.ones((5, 3)), np.array([2, 1, 1, 2, 1]), 3)
        assert tree.n_nodes == 1 and tree.leaf_class[0] == 1
        assert dt_predict(tree, np.zeros(3)) == 1

    def test_majority_tie_lowest(self):
        tree = dt_train(np.ones((4, 1)), np.array([1, 0, 1, 0]), 2)
        assert tree.leaf_class[0] == 0

    def test_xor(self):
        x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        # no single threshold separates XOR, so depth >= 2 is necessary
        for f, t in itertools.product(range(2), [0.5]):
            side = x[:, f] <= t
            assert not (len(set(y[side])) == 1 and len(set(y[~side])) == 1)
        assert np.any(dt_predict(dt_train(x, y, 2, max_depth=1), x) != y)
        tree = dt_train(x, y, 2)
        assert tree.tree_depth >= 2
        assert np.array_equal(dt_predict(tree, x), y)

    def test_hand_built_traversal(self):
        tree = DecisionTree(
            feature=np.array([1, -1, -1]), threshold=np.array([0.5, 0.0, 0.0]),
            left=np.array([1, -1, -1]), right=np.array([2, -1, -1]),
            leaf_class=np.array([0, 3, 7]), counts=np.zeros((3, 8), dtype=np.int64),
            gain=np.zeros(3), depth=np.array([0, 1, 1]), n_features=2, max_depth=17)
        assert dt_predict(tree, np.array([9.0, 0.5])) == 3
        assert dt_predict(tree, np.array([-9.0, 0.6])) == 7

    def test_wrong_length(self):
        tree = dt_train(np.ones((2, 3)), np.array([0, 0]), 2)
        with pytest.raises(ValueError):
            dt_predict(tree, np.ones(4))

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            dt_train(np.empty((0, 2)), np.empty(0, dtype=int), 2)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31), depth=st.integers(0, 6))
    def test_structure_invariants(self, seed, depth):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(80, 3)).round(1)
        y = rng.integers(0, 4, 80)
        tree = dt_train(x, y, 4, max_depth=depth)
        assert tree.tree_depth <= depth
        internal = tree.feature >= 0
        assert np.all(tree.gain[internal] >= 0)
        assert np.all((tree.left[internal] >= 0) & (tree.right[internal] >= 0))
        for i in np.flatnonzero(internal):
            np.testing.assert_array_equal(tree.counts[tree.left[i]] + tree.counts[tree.right[i]], tree.counts[i])
        assert tree.counts[0].sum() == 80
        # training predictions equal the majority of the reached leaf
        leaf_major = tree.counts.argmax(axis=1)
        assert np.array_equal(leaf_major[~internal], tree.leaf_class[~internal])
        assert np.array_equal(dt_predict(tree, x), dt_predict(tree, x))

    def test_deep_random_tree_respects_cap(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3000, 5))
        y = rng.integers(0, 7, 3000)
        tree = dt_train(x, y, 7, max_depth=17)
        assert tree.tree_depth <= 17 and np.all(tree.gain >= 0)


class TestMlpForward:
    def test_zero_weights_uniform(self):
        m = small_model(0)
        for w in m.weights:
            w[...] = 0
        np.testing.assert_allclose(mlp_forward(m, np.ones(5)), 0.25, atol=1e-15)

    @given(seed=st.integers(0, 2**31))
    def test_distribution(self, seed):
        m = small_model(seed)
        p = mlp_forward(m, np.random.default_rng(seed).normal(size=(7, 5)) * 10)
        assert np.all(p >= 0) and np.allclose(p.sum(axis=1), 1, atol=1e-9)

    def test_output_bias_shift(self):
        m = small_model(1)
        x = np.random.default_rng(1).normal(size=(4, 5))
        before = mlp_forward(m, x)
        m.biases[-1] += 123.0
        np.testing.assert_allclose(mlp_forward(m, x), before, atol=1e-12)

    def test_nonfinite_reports_layer(self):
        m = small_model(2)
        m.weights[1][0, 0] = np.inf
        with pytest.raises(NumericError, match="layer 1"):
            mlp_forward(m, np.ones(5))

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            mlp_forward(small_model(0), np.ones(4))


class TestLoss:
    def test_perfect(self):
        assert cross_entropy_loss(np.eye(3), [0, 1, 2]) == 0.0

    def test_uniform_eight(self):
        assert cross_entropy_loss(np.full((2, 8), 1 / 8), [3, 5]) == pytest.approx(np.log(8), abs=1e-12)

    def test_hand_batch(self):
        p = np.array([[0.7, 0.2, 0.1], [0.25, 0.25, 0.5]])
        want = -(np.log(0.7) + np.log(0.5)) / 2
        assert cross_entropy_loss(p, [0, 2]) == pytest.approx(want, abs=1e-12)

    def test_clamped(self):
        assert cross_entropy_loss(np.array([[1.0, 0.0]]), [1]) == pytest.approx(-np.log(1e-12))

    def test_relabel_equivariance(self):
        rng = np.random.default_rng(0)
        p = rng.dirichlet(np.ones(5), size=6)
        y = rng.integers(0, 5, 6)
        perm = rng.permutation(5)
        q = np.empty_like(p)
        q[:, perm] = p
        assert cross_entropy_loss(q, perm[y]) == pytest.approx(cross_entropy_loss(p, y), abs=1e-15)


class TestGradients:
    @pytest.mark.parametrize("seed", range(20))
    def test_random_small_models(self, seed):
        rng = np.random.default_rng(seed)
        sizes = [4] + list(rng.integers(2, 6, size=rng.integers(1, 4))) + [3]
        m = init_model(sizes, rng)
        for b in m.biases:
            b[...] = rng.normal(scale=0.1, size=b.shape)
        x = rng.normal(size=(3, 4))
        assert gradient_check(m, x, rng.integers(0, 3, 3)) < 1e-5

    def test_zero_model(self):
        m = small_model(0, sizes=(3, 2, 4))
        for p in m.weights + m.biases:
            p[...] = 0
        _, gw, gb = loss_and_grads(m, np.zeros(3), [1])
        np.testing.assert_allclose(gb[-1], [0.25, -0.75, 0.25, 0.25], atol=1e-15)
        assert gradient_check(m, np.zeros(3), 1) < 1e-5

    def test_deterministic(self):
        a = gradient_check(small_model(5), np.ones(5), 2)
        b = gradient_check(small_model(5), np.ones(5), 2)
        assert a == b


def toy_problem(n=200, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    y = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(int)
    return x, y


class TestMlpTrain:
    def test_toy_accuracy(self):
        x, y = toy_problem()
        m = mlp_train(x, y, 2, hidden=(10, 10), epochs=200, seed=1)
        assert np.mean(mlp_predict(m, x) == y) >= 0.99
        loss = m.history["loss"]
        assert np.all(np.isfinite(loss)) and loss[-1] <= loss[0]
        assert len(loss) == 201

    def test_zero_learning_rate(self):
        x, y = toy_problem(50)
        m0 = mlp_train(x, y, 2, hidden=(4,), epochs=0, seed=3)
        m1 = mlp_train(x, y, 2, hidden=(4,), learning_rate=0.0, epochs=5, seed=3)
        for a, b in zip(m0.weights + m0.biases, m1.weights + m1.biases):
            assert np.array_equal(a, b)

    def test_deterministic(self):
        x, y = toy_problem(64)
        a = mlp_train(x, y, 2, hidden=(5, 5), epochs=3, seed=9)
        b = mlp_train(x, y, 2, hidden=(5, 5), epochs=3, seed=9)
        for p, q in zip(a.weights + a.biases, b.weights + b.biases):
            assert np.array_equal(p, q)

    def test_default_architecture(self):
        x, y = toy_problem(32)
        m = mlp_train(x, y, 7, epochs=1)
        assert m.layer_sizes == [2] + [10] * 15 + [7]
        assert m.activation == "relu"

    def test_bad_labels(self):
        with pytest.raises(ConfigError):
            mlp_train(np.ones((3, 2)), np.array([0, 1, 5]), 2)


class TestPersistence:
    def test_tree_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=(300, 4)), rng.integers(0, 3, 300)
        tm = TrainedModel(dt_train(x, y, 3, max_depth=6), Standardizer.fit(x), {"note": "t"})
        save_model(tmp_path / "dt.json", tm)
        back = load_model(tmp_path / "dt.json")
        assert back.kind == "dt" and back.metadata == {"note": "t"}
        assert np.array_equal(back.predict(x), tm.predict(x))

    def test_mlp_round_trip(self, tmp_path):
        x, y = toy_problem(100)
        tm = TrainedModel(mlp_train(x, y, 2, hidden=(6, 6), epochs=2), None)
        save_model(tmp_path / "m.json", tm)
        back = load_model(tmp_path / "m.json")
        assert isinstance(back.model, MlpModel)
        assert np.array_equal(mlp_forward(back.model, x), mlp_forward(tm.model, x))
