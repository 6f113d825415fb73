"""From-scratch random-forest regression with impurity-based importances.

Bagged CART trees: greedy splits maximizing weighted variance reduction,
midpoint thresholds, deterministic tie-breaking (lowest feature index,
then lowest threshold). Each tree's randomness comes solely from a seed
derived from the master seed, so results are bit-identical across runs
and thread counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, LengthMismatch

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Leaf:
    prediction: float
    sample_count: int


@dataclass(frozen=True)
class Internal:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    sample_count: int
    impurity_decrease: float  # variance reduction at this node


TreeNode = Union[Leaf, Internal]


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    max_features: Optional[int] = None  # None -> ceil(p/3)
    bootstrap: bool = True
    master_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")

    def features_per_split(self, p: int) -> int:
        if self.max_features is not None:
            return min(self.max_features, p)
        return max(1, math.ceil(p / 3))


def _best_split(X: np.ndarray, y: np.ndarray, feature_indices: np.ndarray,
                min_leaf: int) -> Optional[tuple[int, float, float]]:
    """Best (feature, midpoint threshold, variance reduction) or None.

    Ties resolved toward lower feature index, then lower threshold, by
    scanning features and thresholds in ascending order with a strict
    improvement test.
    """
    n = y.size
    parent_var = float(np.var(y))
    # Gains from different features can be mathematically equal (identical
    # partitions) yet differ in the last bits; ties within this tolerance
    # resolve to the lowest feature index, then the lowest threshold.
    tie_tol = 1e-12 * max(parent_var, 1e-300)
    best: Optional[tuple[int, float, float]] = None
    best_gain = 0.0
    lefts = np.arange(min_leaf, n - min_leaf + 1)  # candidate left-side counts
    if lefts.size == 0:
        return None
    for f in np.sort(feature_indices):
        xs = X[:, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        ys_sorted = y[order]
        csum = np.cumsum(ys_sorted)
        csum2 = np.cumsum(ys_sorted * ys_sorted)
        total, total2 = csum[-1], csum2[-1]
        # boundaries only between adjacent distinct values
        valid = xs_sorted[lefts - 1] != xs_sorted[lefts]
        if not valid.any():
            continue
        nl = lefts[valid].astype(float)
        nr = n - nl
        sl = csum[lefts[valid] - 1]
        s2l = csum2[lefts[valid] - 1]
        var_l = s2l / nl - (sl / nl) ** 2
        var_r = (total2 - s2l) / nr - ((total - sl) / nr) ** 2
        gains = parent_var - (nl / n) * var_l - (nr / n) * var_r
        # first candidate within tolerance of this feature's max -> lowest threshold
        j = int(np.argmax(gains >= gains.max() - tie_tol))
        if gains[j] > best_gain + tie_tol:
            i = int(lefts[valid][j])
            best_gain = float(gains[j])
            best = (int(f), float((xs_sorted[i - 1] + xs_sorted[i]) / 2.0), best_gain)
    return best


def fit_tree(X: np.ndarray, y: np.ndarray, config: ForestConfig,
             rng_seed: int | np.random.SeedSequence | None = None) -> TreeNode:
    """Greedy CART regression tree on (X, y)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got shape {X.shape}")
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"{X.shape[0]} rows vs {y.size} targets")
    if y.size == 0:
        raise EmptyDataset("cannot fit a tree on zero rows")
    rng = np.random.default_rng(rng_seed)
    k = config.features_per_split(X.shape[1])
    # canonical row order: makes node statistics (float summation order)
    # independent of how the training rows were originally arranged
    order = np.lexsort((y, *reversed(X.T)))
    return _grow(X[order], y[order], config, rng, k, depth=0)


def _grow(X, y, config, rng, k, depth) -> TreeNode:
    n = y.size
    if (
        n < 2 * config.min_samples_leaf
        or n < 2
        or (config.max_depth is not None and depth >= config.max_depth)
        or np.var(y) == 0.0
    ):
        return Leaf(float(np.mean(y)), n)
    p = X.shape[1]
    feats = rng.choice(p, size=k, replace=False) if k < p else np.arange(p)
    split = _best_split(X, y, feats, config.min_samples_leaf)
    if split is None:
        return Leaf(float(np.mean(y)), n)
    f, thr, gain = split
    mask = X[:, f] <= thr
    left = _grow(X[mask], y[mask], config, rng, k, depth + 1)
    right = _grow(X[~mask], y[~mask], config, rng, k, depth + 1)
    return Internal(f, thr, left, right, n, gain)


@dataclass(frozen=True)
class ForestModel:
    config: ForestConfig
    trees: tuple[TreeNode, ...]
    n_features: int


def _tree_seed(master_seed: int, tree_index: int) -> np.random.SeedSequence:
    # splittable counter-based derivation: independent of training order
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(tree_index,))


def fit_forest(X: np.ndarray, y: np.ndarray, config: ForestConfig = ForestConfig()) -> ForestModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DimensionMismatch(f"X shape {X.shape} vs y length {y.size}")
    if y.size == 0:
        raise EmptyDataset("cannot fit a forest on zero rows")
    n = y.size
    trees = []
    for t in range(config.n_trees):
        seed = _tree_seed(config.master_seed, t)
        if config.bootstrap:
            boot_rng = np.random.default_rng(seed)
            idx = boot_rng.integers(0, n, size=n)
            tree = fit_tree(X[idx], y[idx], config, seed.spawn(1)[0])
        else:
            tree = fit_tree(X, y, config, seed.spawn(1)[0])
        trees.append(tree)
    return ForestModel(config, tuple(trees), X.shape[1])


def _predict_one(node: TreeNode, x: np.ndarray) -> float:
    while isinstance(node, Internal):
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.prediction


def tree_predict(tree: TreeNode, x: Sequence[float]) -> float:
    return _predict_one(tree, np.asarray(x, dtype=float))


def forest_predict(model: ForestModel, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise DimensionMismatch(f"expected {model.n_features} features, got shape {x.shape}")
    return float(np.mean([_predict_one(t, x) for t in model.trees]))


def forest_predict_matrix(model: ForestModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(f"expected (n, {model.n_features}), got {X.shape}")
    return np.array([forest_predict(model, row) for row in X])


@dataclass(frozen=True)
class ImportanceReport:
    importances: np.ndarray  # normalized, aligned with feature index
    ranking: tuple[int, ...]  # feature indices, descending importance
    no_splits: bool = False


def feature_importance(model: ForestModel) -> ImportanceReport:
    """Normalized total impurity decrease, summed as n_node * gain per split."""
    totals = np.zeros(model.n_features)

    def walk(node: TreeNode):
        if isinstance(node, Internal):
            totals[node.feature_index] += node.sample_count * node.impurity_decrease
            walk(node.left)
            walk(node.right)

    for t in model.trees:
        walk(t)
    s = totals.sum()
    if s <= 0.0:
        return ImportanceReport(totals, tuple(range(model.n_features)), no_splits=True)
    imp = totals / s
    # stable sort keeps original index order among exact ties
    ranking = tuple(int(i) for i in np.argsort(-imp, kind="stable"))
    return ImportanceReport(imp, ranking)


def evaluate_regression(predictions: Sequence[float], actuals: Sequence[float]) -> dict:
    """MAE plus MAPE-style accuracy (100 - 100 * mean |err| / |actual|).

    Accuracy is None when any actual is zero; MAE is always returned.
    """
    p = np.asarray(predictions, dtype=float)
    a = np.asarray(actuals, dtype=float)
    if p.size != a.size:
        raise LengthMismatch(f"{p.size} predictions vs {a.size} actuals")
    if p.size == 0:
        raise LengthMismatch("empty series")
    mae = float(np.mean(np.abs(p - a)))
    if np.any(a == 0.0):
        return {"mae": mae, "mape_accuracy": None}
    accuracy = 100.0 - 100.0 * float(np.mean(np.abs(p - a) / np.abs(a)))
    return {"mae": mae, "mape_accuracy": accuracy}


# --- persistence ----------------------------------------------------------

def _node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": True, "prediction": node.prediction, "n": node.sample_count}
    return {
        "leaf": False,
        "feature": node.feature_index,
        "threshold": node.threshold,
        "n": node.sample_count,
        "gain": node.impurity_decrease,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict) -> TreeNode:
    if d["leaf"]:
        return Leaf(d["prediction"], d["n"])
    return Internal(d["feature"], d["threshold"],
                    _node_from_dict(d["left"]), _node_from_dict(d["right"]),
                    d["n"], d["gain"])


def forest_to_json(model: ForestModel) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "forest",
        "n_features": model.n_features,
        "config": {
            "n_trees": model.config.n_trees,
            "max_depth": model.config.max_depth,
            "min_samples_leaf": model.config.min_samples_leaf,
            "max_features": model.config.max_features,
            "bootstrap": model.config.bootstrap,
            "master_seed": model.config.master_seed,
        },
        "trees": [_node_to_dict(t) for t in model.trees],
    }
    return json.dumps(doc, sort_keys=True)


def forest_from_json(text: str) -> ForestModel:
    doc = json.loads(text)
    cfg = ForestConfig(**doc["config"])
    trees = tuple(_node_from_dict(t) for t in doc["trees"])
    return ForestModel(cfg, trees, doc["n_features"])
