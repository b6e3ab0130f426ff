"""Tree ensembles over embedding features: bagged CART forest and
first-order gradient boosting with a softmax objective.

Both models expose per-class scores ("logits") so margin confidence can be
computed downstream: vote fractions for the forest, additive raw scores for
boosting. Training is deterministic for fixed data, hyperparameters and
seed; forest trees draw their randomness from per-tree counter-based
streams so results do not depend on training parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from priopipe import _kernels

__all__ = [
    "DecisionTree",
    "RandomForestModel",
    "GradientBoostingModel",
    "train_random_forest",
    "train_gradient_boosting",
    "predict_logits",
    "predict",
]


def _as_xy(X, y=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if y is None:
        return X
    y = np.asarray(y, dtype=np.int64)
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y length mismatch")
    return X, y


def _threshold(lower: float, upper: float) -> float:
    mid = (lower + upper) / 2.0
    # midpoint can round up to the upper value for adjacent doubles; clamp
    # so the `x <= threshold` predicate keeps the partition exact
    return lower if mid >= upper else mid


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    value: np.ndarray | None = None  # leaf payload

    def as_dict(self) -> dict:
        if self.value is not None:
            return {"value": [float(v) for v in np.atleast_1d(self.value)]}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
        }


class DecisionTree:
    """CART tree; classification (Gini) when n_classes is set, regression
    (squared error, mean leaf value) otherwise."""

    def __init__(
        self,
        n_classes: int | None = None,
        max_depth: int | None = None,
        rng: np.random.Generator | None = None,
        feature_subsample: int | None = None,
    ):
        self.n_classes = n_classes
        self.max_depth = max_depth
        self.rng = rng
        self.feature_subsample = feature_subsample
        self.nodes: list[_Node] = []

    # -- fitting -----------------------------------------------------------

    def fit(self, X: np.ndarray, y: np.ndarray) -> "DecisionTree":
        X = _as_xy(X)
        dtype = np.int64 if self.n_classes is not None else np.float64
        y = np.asarray(y, dtype=dtype)
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y length mismatch")
        self.n_features = X.shape[1]
        self.nodes = []
        if hasattr(self, "_is_leaf"):
            del self._is_leaf  # invalidate cached traversal arrays
        stack = [(np.arange(X.shape[0]), 0, -1, False)]  # idx, depth, parent, right?
        while stack:
            idx, depth, parent, is_right = stack.pop()
            node_id = len(self.nodes)
            if parent >= 0:
                if is_right:
                    self.nodes[parent].right = node_id
                else:
                    self.nodes[parent].left = node_id
            split = self._find_split(X, y, idx, depth)
            if split is None:
                self.nodes.append(_Node(value=self._leaf_value(y, idx)))
                continue
            feature, threshold, left_idx, right_idx = split
            self.nodes.append(_Node(feature=feature, threshold=threshold))
            # push right first so the left child is fitted (and numbered) first
            stack.append((right_idx, depth + 1, node_id, True))
            stack.append((left_idx, depth + 1, node_id, False))
        return self

    def _leaf_value(self, y, idx) -> np.ndarray:
        if self.n_classes is not None:
            return np.bincount(y[idx], minlength=self.n_classes).astype(np.float64)
        return np.asarray([float(y[idx].mean())])

    def _find_split(self, X, y, idx, depth):
        if idx.shape[0] < 2:
            return None
        if self.max_depth is not None and depth >= self.max_depth:
            return None
        y_node = y[idx]
        if self.n_classes is not None and np.all(y_node == y_node[0]):
            return None
        if self.feature_subsample is not None:
            feats = np.sort(self.rng.permutation(self.n_features)[: self.feature_subsample])
        else:
            feats = np.arange(self.n_features)
        sub = np.ascontiguousarray(X[np.ix_(idx, feats)])
        order = np.argsort(sub, axis=0, kind="stable")
        values = np.ascontiguousarray(np.take_along_axis(sub, order, axis=0))
        if self.n_classes is not None:
            target = np.ascontiguousarray(y_node[order].astype(np.int64))
            col, row, _cost = _kernels.scan_split_gini(values, target, self.n_classes)
        else:
            target = np.ascontiguousarray(y_node[order].astype(np.float64))
            col, row, _cost = _kernels.scan_split_mse(values, target)
        if col < 0:
            return None
        feature = int(feats[col])
        threshold = _threshold(values[row - 1, col], values[row, col])
        mask = X[idx, feature] <= threshold
        return feature, threshold, idx[mask], idx[~mask]

    # -- inference ---------------------------------------------------------

    def _ensure_arrays(self) -> None:
        if hasattr(self, "_is_leaf"):
            return
        width = max(
            (len(n.value) for n in self.nodes if n.value is not None), default=0
        )
        if width == 0:
            raise RuntimeError("tree has no leaves")
        count = len(self.nodes)
        self._is_leaf = np.asarray([n.value is not None for n in self.nodes])
        self._features = np.asarray([max(n.feature, 0) for n in self.nodes])
        self._thresholds = np.asarray([n.threshold for n in self.nodes])
        self._lefts = np.asarray([max(n.left, 0) for n in self.nodes])
        self._rights = np.asarray([max(n.right, 0) for n in self.nodes])
        self._leaf_values = np.zeros((count, width), dtype=np.float64)
        for i, n in enumerate(self.nodes):
            if n.value is not None:
                self._leaf_values[i] = n.value

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf payload per row, stacked. Routes all rows level by level."""
        X = _as_xy(X)
        self._ensure_arrays()
        node_ids = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            pending = np.where(~self._is_leaf[node_ids])[0]
            if pending.size == 0:
                break
            nid = node_ids[pending]
            go_left = X[pending, self._features[nid]] <= self._thresholds[nid]
            node_ids[pending] = np.where(go_left, self._lefts[nid], self._rights[nid])
        return self._leaf_values[node_ids]

    def as_dict(self) -> dict:
        return {"nodes": [n.as_dict() for n in self.nodes]}

    @classmethod
    def from_dict(cls, payload: dict) -> "DecisionTree":
        tree = cls()
        for raw in payload["nodes"]:
            if "value" in raw:
                tree.nodes.append(_Node(value=np.asarray(raw["value"])))
            else:
                tree.nodes.append(
                    _Node(
                        feature=raw["feature"],
                        threshold=raw["threshold"],
                        left=raw["left"],
                        right=raw["right"],
                    )
                )
        return tree


class RandomForestModel:
    """Bagged purity-grown CART trees with sqrt(d) feature subsampling.

    Logits are vote fractions: the share of trees whose leaf majority is
    each class. Argmax ties resolve to the smaller class index.
    """

    def __init__(self, n_estimators: int = 100, seed: int = 0):
        if n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        self.n_estimators = n_estimators
        self.seed = seed
        self.trees: list[DecisionTree] = []

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "RandomForestModel":
        X, y = _as_xy(X, y)
        if X.shape[0] == 0:
            raise ValueError("empty training set")
        if y.min() < 0 or y.max() >= n_classes:
            raise ValueError("labels outside [0, n_classes)")
        self.n_classes = n_classes
        subsample = max(1, int(np.sqrt(X.shape[1])))
        self.trees = []
        for t in range(self.n_estimators):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=self.seed, spawn_key=(t,))
            )
            boot = rng.integers(0, X.shape[0], X.shape[0])
            tree = DecisionTree(
                n_classes=n_classes, rng=rng, feature_subsample=subsample
            )
            tree.fit(X[boot], y[boot])
            self.trees.append(tree)
        return self

    def predict_logits(self, X: np.ndarray) -> np.ndarray:
        X = _as_xy(X)
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.float64)
        for tree in self.trees:
            counts = tree.apply(X)
            picks = counts.argmax(axis=1)
            votes[np.arange(X.shape[0]), picks] += 1.0
        return votes / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_logits(X).argmax(axis=1)

    def as_dict(self) -> dict:
        return {
            "model": "random_forest",
            "n_estimators": self.n_estimators,
            "seed": self.seed,
            "n_classes": self.n_classes,
            "trees": [t.as_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RandomForestModel":
        model = cls(payload["n_estimators"], payload["seed"])
        model.n_classes = payload["n_classes"]
        model.trees = [DecisionTree.from_dict(t) for t in payload["trees"]]
        return model


def _softmax(F: np.ndarray) -> np.ndarray:
    shifted = F - F.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class GradientBoostingModel:
    """First-order boosting: per stage, one depth-limited regression tree per
    class fitted to the softmax residual (one-hot minus probability); raw
    additive scores are the logits."""

    def __init__(
        self,
        n_estimators: int = 100,
        learning_rate: float = 0.1,
        max_depth: int = 3,
        seed: int = 0,
    ):
        if n_estimators < 0:
            raise ValueError("n_estimators must be >= 0")
        if learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.seed = seed
        self.stages: list[list[DecisionTree]] = []

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "GradientBoostingModel":
        X, y = _as_xy(X, y)
        if X.shape[0] == 0:
            raise ValueError("empty training set")
        if y.min() < 0 or y.max() >= n_classes:
            raise ValueError("labels outside [0, n_classes)")
        self.n_classes = n_classes
        onehot = np.zeros((X.shape[0], n_classes), dtype=np.float64)
        onehot[np.arange(X.shape[0]), y] = 1.0
        F = np.zeros((X.shape[0], n_classes), dtype=np.float64)
        self.stages = []
        self.train_log_loss_: list[float] = []
        for _ in range(self.n_estimators):
            proba = _softmax(F)
            self.train_log_loss_.append(
                float(-np.log(np.maximum(proba[np.arange(X.shape[0]), y], 1e-300)).mean())
            )
            residual = onehot - proba
            stage = []
            for c in range(n_classes):
                tree = DecisionTree(max_depth=self.max_depth)
                tree.fit(X, residual[:, c])
                F[:, c] += self.learning_rate * tree.apply(X)[:, 0]
                stage.append(tree)
            self.stages.append(stage)
        return self

    def predict_logits(self, X: np.ndarray) -> np.ndarray:
        X = _as_xy(X)
        F = np.zeros((X.shape[0], self.n_classes), dtype=np.float64)
        for stage in self.stages:
            for c, tree in enumerate(stage):
                F[:, c] += self.learning_rate * tree.apply(X)[:, 0]
        return F

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_logits(X).argmax(axis=1)

    def as_dict(self) -> dict:
        return {
            "model": "gradient_boosting",
            "n_estimators": self.n_estimators,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "seed": self.seed,
            "n_classes": self.n_classes,
            "stages": [[t.as_dict() for t in stage] for stage in self.stages],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GradientBoostingModel":
        model = cls(
            payload["n_estimators"],
            payload["learning_rate"],
            payload["max_depth"],
            payload["seed"],
        )
        model.n_classes = payload["n_classes"]
        model.stages = [
            [DecisionTree.from_dict(t) for t in stage] for stage in payload["stages"]
        ]
        return model


def train_random_forest(X, y, n_estimators: int, seed: int, n_classes: int | None = None):
    y = np.asarray(y, dtype=np.int64)
    k = n_classes if n_classes is not None else int(y.max()) + 1
    return RandomForestModel(n_estimators, seed).fit(X, y, k)


def train_gradient_boosting(
    X,
    y,
    n_estimators: int,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    seed: int = 0,
    n_classes: int | None = None,
):
    y = np.asarray(y, dtype=np.int64)
    k = n_classes if n_classes is not None else int(y.max()) + 1
    return GradientBoostingModel(n_estimators, learning_rate, max_depth, seed).fit(X, y, k)


def predict_logits(model, x: np.ndarray) -> np.ndarray:
    """Class score vector for one sample."""
    return model.predict_logits(np.atleast_2d(x))[0]


def predict(model, x: np.ndarray) -> int:
    """Argmax class for one sample; ties resolve to the smaller index."""
    return int(predict_logits(model, x).argmax())
