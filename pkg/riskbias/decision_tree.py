"""
Greedy axis-aligned classification tree on the unit hypercube.

Fitting is done by scikit-learn's best-first DecisionTreeClassifier (Gini,
max_leaf_nodes): the leaf whose best split removes the most impurity is split
next, until max_leaves leaves exist or no split helps. The fitted structure is
copied into TreeNode records carrying the hyperrectangle each node covers, so
the exact risk under a ContinuousModel can be computed without a test set.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from .errors import InternalError
from .models import ContinuousModel, LabeledPoint
from .numerics import compensated_sum

logger = logging.getLogger(__name__)

# A split must remove at least this much sample-weighted Gini impurity.
MIN_IMPURITY_DECREASE = 1e-12
PARTITION_TOLERANCE = 1e-9
# child id sklearn stores for leaves
_LEAF = -1
# settles ties between equally good features reproducibly
_RANDOM_STATE = 0


@dataclass(frozen=True)
class LabeledSample:
    """Array form of a sequence of LabeledPoint: x has shape (N, dim), y shape (N,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.ndim != 2 or self.y.shape != (self.x.shape[0],):
            raise ValueError(f"inconsistent sample shapes x={self.x.shape}, y={self.y.shape}")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @classmethod
    def from_points(cls, points: Sequence[LabeledPoint]) -> "LabeledSample":
        if not points:
            raise ValueError("sample must contain at least one point")
        return cls(
            x=np.array([pt.x for pt in points], dtype=float),
            y=np.array([pt.y for pt in points], dtype=np.int64),
        )

    def points(self) -> list[LabeledPoint]:
        return [LabeledPoint(x=tuple(row), y=int(label)) for row, label in zip(self.x.tolist(), self.y)]

    def without(self, index: int) -> "LabeledSample":
        keep = np.arange(len(self)) != index
        return LabeledSample(x=self.x[keep], y=self.y[keep])


@dataclass(frozen=True)
class TreeNode:
    """Leaf when left < 0; otherwise points with x[axis] <= threshold go left."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    count: int
    ones: int
    axis: int = -1
    threshold: float = float("nan")
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.left < 0

    @property
    def label(self) -> int:
        # majority class; a tie goes to class 0
        return 1 if self.ones > self.count - self.ones else 0

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))


@dataclass(frozen=True)
class DecisionTree:
    nodes: tuple[TreeNode, ...]
    dim: int

    def leaves(self) -> list[TreeNode]:
        return [node for node in self.nodes if node.is_leaf]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    def leaf_volumes(self) -> np.ndarray:
        return np.array([leaf.volume for leaf in self.leaves()])

    def validate(self) -> None:
        """
        Check that the leaf rectangles partition the unit cube.

        Raises:
            InternalError: if the leaf volumes do not sum to 1 within 1e-9.
        """
        total = compensated_sum(self.leaf_volumes())
        if abs(total - 1.0) > PARTITION_TOLERANCE:
            raise InternalError(f"leaf rectangles cover volume {total!r}, expected 1")

    def predict(self, x: np.ndarray) -> np.ndarray:
        """
        Predicted labels for the rows of x (shape (n, dim) or (dim,)).

        Coordinates are compared in float32, as the fitted estimator saw them.
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float32)).astype(float)
        axes = np.array([max(node.axis, 0) for node in self.nodes])
        thresholds = np.array([node.threshold for node in self.nodes])
        lefts = np.array([node.left for node in self.nodes])
        rights = np.array([node.right for node in self.nodes])
        labels = np.array([node.label for node in self.nodes], dtype=np.int64)

        current = np.zeros(x.shape[0], dtype=np.int64)
        rows = np.arange(x.shape[0])
        while True:
            internal = lefts[current] >= 0
            if not internal.any():
                break
            go_left = x[rows, axes[current]] <= thresholds[current]
            step = np.where(go_left, lefts[current], rights[current])
            current = np.where(internal, step, current)
        return labels[current]


# ============================================================================
# Training
# ============================================================================

def _fit_estimator(sample: LabeledSample, max_leaves: int) -> DecisionTreeClassifier:
    estimator = DecisionTreeClassifier(
        criterion='gini',
        max_leaf_nodes=max_leaves,
        min_impurity_decrease=MIN_IMPURITY_DECREASE,
        random_state=_RANDOM_STATE,
    )
    return estimator.fit(sample.x, sample.y)


def _nodes_from_estimator(estimator: DecisionTreeClassifier, sample: LabeledSample) -> list[TreeNode]:
    """Copy the fitted structure, deriving each node's rectangle from the splits above it."""
    structure = estimator.tree_
    path = estimator.decision_path(sample.x)
    counts = np.asarray(path.sum(axis=0)).ravel()
    ones = np.asarray(path.T.dot(sample.y)).ravel()

    dim = sample.dim
    boxes = {0: ((0.0,) * dim, (1.0,) * dim)}
    nodes: dict[int, TreeNode] = {}
    stack = [0]
    while stack:
        node_id = stack.pop()
        lower, upper = boxes.pop(node_id)
        left = int(structure.children_left[node_id])
        right = int(structure.children_right[node_id])
        common = dict(lower=lower, upper=upper, count=int(counts[node_id]), ones=int(ones[node_id]))
        if left == _LEAF:
            nodes[node_id] = TreeNode(**common)
            continue

        axis = int(structure.feature[node_id])
        threshold = float(structure.threshold[node_id])
        nodes[node_id] = TreeNode(**common, axis=axis, threshold=threshold, left=left, right=right)
        boxes[left] = (lower, upper[:axis] + (threshold,) + upper[axis + 1:])
        boxes[right] = (lower[:axis] + (threshold,) + lower[axis + 1:], upper)
        stack.extend((right, left))
    return [nodes[node_id] for node_id in range(structure.node_count)]


def train_tree(sample: LabeledSample | Sequence[LabeledPoint], max_leaves: int) -> DecisionTree:
    """
    Grow a tree with at most max_leaves leaves by best-first Gini splitting.

    Split thresholds are midpoints between consecutive distinct coordinate values.

    Raises:
        ValueError: if the sample is empty or max_leaves < 1.
        InternalError: if the leaf rectangles do not partition the cube.
    """
    if not isinstance(sample, LabeledSample):
        sample = LabeledSample.from_points(sample)
    if len(sample) == 0:
        raise ValueError("cannot train a tree on an empty sample")
    if max_leaves < 1:
        raise ValueError(f"max_leaves must be >= 1, got {max_leaves}")

    if max_leaves == 1:
        # max_leaf_nodes must be at least 2
        root = TreeNode(
            lower=(0.0,) * sample.dim, upper=(1.0,) * sample.dim,
            count=len(sample), ones=int(sample.y.sum()),
        )
        return DecisionTree(nodes=(root,), dim=sample.dim)

    nodes = _nodes_from_estimator(_fit_estimator(sample, max_leaves), sample)
    tree = DecisionTree(nodes=tuple(nodes), dim=sample.dim)
    tree.validate()
    return tree


# ============================================================================
# Risk evaluation
# ============================================================================

def tree_true_risk(model: ContinuousModel, tree: DecisionTree) -> float:
    """Exact misclassification probability of the tree under the model."""
    if tree.dim != model.dim:
        raise ValueError(f"tree dimension {tree.dim} != model dimension {model.dim}")
    tree.validate()

    delta = model.delta
    contributions = []
    for leaf in tree.leaves():
        lower = np.asarray(leaf.lower)
        upper = np.asarray(leaf.upper)
        inner = float(np.prod(np.clip(np.minimum(upper, delta) - lower, 0.0, None)))
        outer = leaf.volume - inner
        if leaf.label == 0:
            contributions.extend((inner * model.g1, outer * model.g2))
        else:
            contributions.extend((inner * (1.0 - model.g1), outer * (1.0 - model.g2)))
    return compensated_sum(contributions)


def tree_empirical_risk(tree: DecisionTree, sample: LabeledSample) -> float:
    """Fraction of training points the tree misclassifies."""
    return float(np.mean(tree.predict(sample.x) != sample.y))


def tree_loo(sample: LabeledSample, max_leaves: int) -> float:
    """Leave-one-out error: retrain without each point and classify it."""
    if len(sample) < 2:
        raise ValueError("leave-one-out needs at least two points")
    errors = 0
    for i in range(len(sample)):
        tree = train_tree(sample.without(i), max_leaves)
        errors += int(tree.predict(sample.x[i])[0] != sample.y[i])
    return errors / len(sample)
