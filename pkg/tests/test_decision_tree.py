"""Tests for the greedy tree classifier."""

import numpy as np
import pytest

from riskbias.decision_tree import (
    DecisionTree,
    LabeledSample,
    TreeNode,
    _fit_estimator,
    train_tree,
    tree_empirical_risk,
    tree_loo,
    tree_true_risk,
)
from riskbias.errors import InternalError
from riskbias.models import ContinuousModel, LabeledPoint
from riskbias.simulation import sample_continuous


def line_sample(xs, ys) -> LabeledSample:
    return LabeledSample(x=np.asarray(xs, dtype=float).reshape(-1, 1), y=np.asarray(ys, dtype=np.int64))


SEPARABLE = line_sample([0.1, 0.2, 0.3, 0.7, 0.8, 0.9], [0, 0, 0, 1, 1, 1])


class TestLabeledSample:
    def test_from_points(self):
        sample = LabeledSample.from_points([LabeledPoint(x=(0.1, 0.2), y=1), LabeledPoint(x=(0.5, 0.9), y=0)])
        assert len(sample) == 2
        assert sample.dim == 2
        assert sample.points()[1] == LabeledPoint(x=(0.5, 0.9), y=0)

    def test_without(self):
        assert SEPARABLE.without(0).x[:, 0].tolist() == [0.2, 0.3, 0.7, 0.8, 0.9]

    def test_shapes_checked(self):
        with pytest.raises(ValueError):
            LabeledSample(x=np.zeros((3, 2)), y=np.zeros(2, dtype=np.int64))


class TestTrainTree:
    def test_single_leaf_majority(self):
        tree = train_tree(line_sample([0.1, 0.5, 0.9], [1, 1, 0]), max_leaves=1)
        assert tree.n_leaves == 1
        assert tree.predict(np.array([[0.3]])).tolist() == [1]

    def test_single_leaf_tie_goes_to_zero(self):
        tree = train_tree(line_sample([0.1, 0.9], [1, 0]), max_leaves=1)
        assert tree.leaves()[0].label == 0

    def test_separable_split(self):
        tree = train_tree(SEPARABLE, max_leaves=2)
        root = tree.nodes[0]
        assert root.threshold == pytest.approx(0.5)
        assert tree_empirical_risk(tree, SEPARABLE) == 0.0

    def test_threshold_point_goes_left(self):
        tree = train_tree(SEPARABLE, max_leaves=2)
        threshold = tree.nodes[0].threshold
        assert tree.predict(np.array([[threshold], [threshold + 1e-6]])).tolist() == [0, 1]

    def test_pure_sample_not_split(self):
        tree = train_tree(line_sample([0.1, 0.4, 0.8], [1, 1, 1]), max_leaves=5)
        assert tree.n_leaves == 1

    def test_duplicate_inputs_not_split(self):
        tree = train_tree(line_sample([0.4, 0.4], [0, 1]), max_leaves=5)
        assert tree.n_leaves == 1

    def test_stops_when_no_split_helps(self):
        # every axis-aligned cut of this pattern leaves the Gini impurity unchanged
        xor = LabeledSample(
            x=np.array([[0.25, 0.25], [0.75, 0.75], [0.25, 0.75], [0.75, 0.25]]),
            y=np.array([0, 0, 1, 1], dtype=np.int64),
        )
        assert train_tree(xor, max_leaves=4).n_leaves == 1

    def test_agrees_with_fitted_estimator(self):
        sample = sample_continuous(ContinuousModel(dim=2, theta=0.5, g1=0.2, g2=0.8), 70, seed=9)
        tree = train_tree(sample, max_leaves=7)
        estimator = _fit_estimator(sample, 7)
        assert tree.n_leaves == estimator.get_n_leaves()
        x = np.vstack([sample.x, np.random.default_rng(1).random((2000, 2))])
        np.testing.assert_array_equal(tree.predict(x), estimator.predict(x))

    def test_accepts_points(self):
        tree = train_tree(SEPARABLE.points(), max_leaves=2)
        assert tree.n_leaves == 2

    def test_partition(self):
        model = ContinuousModel(dim=3, theta=0.4, g1=0.2, g2=0.7)
        sample = sample_continuous(model, 80, seed=12)
        tree = train_tree(sample, max_leaves=8)
        assert 1 <= tree.n_leaves <= 8
        assert tree.leaf_volumes().sum() == pytest.approx(1.0, abs=1e-9)
        for leaf in tree.leaves():
            assert all(0.0 <= lo < hi <= 1.0 for lo, hi in zip(leaf.lower, leaf.upper))

    def test_leaves_hold_their_points(self):
        sample = sample_continuous(ContinuousModel(dim=2, theta=0.5, g1=0.1, g2=0.9), 60, seed=4)
        tree = train_tree(sample, max_leaves=6)
        assert sum(leaf.count for leaf in tree.leaves()) == len(sample)

    def test_training_error_nonincreasing_in_leaves(self):
        sample = sample_continuous(ContinuousModel(dim=2, theta=0.5, g1=0.3, g2=0.7), 50, seed=6)
        errors = [tree_empirical_risk(train_tree(sample, L), sample) for L in range(1, 11)]
        assert np.all(np.diff(errors) <= 0.0)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            train_tree([], max_leaves=3)
        with pytest.raises(ValueError):
            train_tree(SEPARABLE, max_leaves=0)


class TestValidate:
    def test_bad_partition(self):
        half = TreeNode(lower=(0.0, 0.0), upper=(0.5, 1.0), count=1, ones=0)
        with pytest.raises(InternalError):
            DecisionTree(nodes=(half,), dim=2).validate()


class TestTrueRisk:
    model = ContinuousModel(dim=2, theta=0.5, g1=0.2, g2=0.6)

    def test_constant_trees(self):
        zeros = train_tree(LabeledSample(x=np.full((3, 2), 0.5), y=np.zeros(3, dtype=np.int64)), 1)
        ones = train_tree(LabeledSample(x=np.full((3, 2), 0.5), y=np.ones(3, dtype=np.int64)), 1)
        assert tree_true_risk(self.model, zeros) == pytest.approx(0.5 * 0.2 + 0.5 * 0.6, abs=1e-15)
        assert tree_true_risk(self.model, ones) == pytest.approx(0.6, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            tree_true_risk(self.model, train_tree(SEPARABLE, 2))

    def test_matches_monte_carlo(self):
        sample = sample_continuous(self.model, 60, seed=10)
        tree = train_tree(sample, max_leaves=5)
        x = np.random.default_rng(0).random((200_000, 2))
        g = np.where(np.all(x < self.model.delta, axis=1), self.model.g1, self.model.g2)
        error = np.where(tree.predict(x) == 1, 1.0 - g, g)
        assert tree_true_risk(self.model, tree) == pytest.approx(error.mean(), abs=0.005)


class TestLoo:
    def test_separable(self):
        assert tree_loo(SEPARABLE, max_leaves=2) == 0.0

    def test_majority_flips(self):
        # without splits, removing a point always hands the majority to the other class
        assert tree_loo(SEPARABLE, max_leaves=1) == 1.0

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            tree_loo(line_sample([0.3], [1]), max_leaves=2)
