"""Random decision forest over channel feature vectors.

Trees are grown with Gini-impurity splits on bootstrap resamples, with
ceil(sqrt(d)) features drawn per split.  Labels are opaque strings at this
level; the diagnosis layer encodes (action, severity) pairs into them, ordered
so that the smallest label id is also the canonical tie-break.

Everything is deterministic given the training seed: per-tree RNG streams are
derived from (seed, tree index), split ties resolve to the lowest feature
index then the lowest threshold, and serialization is canonical JSON, so a
forest hash is stable across runs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_TAG_TREE = 201


class TrainingError(ValueError):
    """Training set that cannot produce a forest."""


class DimensionError(ValueError):
    """Feature vector incompatible with the trained forest."""


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    label: int = -1


@dataclass(frozen=True)
class Tree:
    """Flattened decision tree; leaves have feature == -1."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[idx]
            internal = feat >= 0
            if not internal.any():
                break
            rows = np.nonzero(internal)[0]
            node = idx[rows]
            go_left = X[rows, self.feature[node]] <= self.threshold[node]
            idx[rows] = np.where(go_left, self.left[node], self.right[node])
        return self.label[idx]

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass(frozen=True)
class Forest:
    trees: tuple[Tree, ...]
    label_names: tuple[str, ...]
    n_features: int
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def label_votes(self, X: np.ndarray) -> np.ndarray:
        """(n_samples, n_labels) matrix of tree votes per label."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionError(
                f"forest was trained on {self.n_features} features, got {X.shape[1]}")
        votes = np.zeros((len(X), len(self.label_names)), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees:
            votes[rows, tree.predict(X)] += 1
        return votes


def _best_split(X: np.ndarray, y: np.ndarray, indices: np.ndarray,
                features: Sequence[int], n_labels: int):
    """Lowest weighted-Gini split among `features`; ties go to the lowest
    feature index, then the lowest threshold."""
    n = len(indices)
    best = None  # (score, feature, threshold)
    y_node = y[indices]
    for f in features:
        xs = X[indices, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        ys_sorted = y_node[order]
        distinct = xs_sorted[:-1] < xs_sorted[1:]
        if not distinct.any():
            continue
        onehot = ys_sorted[:, None] == np.arange(n_labels)[None, :]
        prefix = np.cumsum(onehot, axis=0)  # class counts among first i+1 samples
        positions = np.nonzero(distinct)[0]
        left_counts = prefix[positions].astype(float)
        total = prefix[-1].astype(float)
        right_counts = total[None, :] - left_counts
        n_left = positions + 1.0
        n_right = n - n_left
        gini_left = 1.0 - (left_counts ** 2).sum(axis=1) / n_left ** 2
        gini_right = 1.0 - (right_counts ** 2).sum(axis=1) / n_right ** 2
        weighted = (n_left * gini_left + n_right * gini_right) / n
        k = int(np.argmin(weighted))  # first minimum: lowest threshold wins
        score = float(weighted[k])
        if best is None or score < best[0]:
            pos = positions[k]
            threshold = 0.5 * (float(xs_sorted[pos]) + float(xs_sorted[pos + 1]))
            best = (score, f, threshold)
    return best


def _majority_label(y: np.ndarray, n_labels: int) -> int:
    counts = np.bincount(y, minlength=n_labels)
    return int(np.argmax(counts))  # first max: smallest label id breaks ties


def build_tree(X: np.ndarray, y: np.ndarray, n_labels: int,
               rng: np.random.Generator | None = None,
               max_features: int | None = None,
               min_leaf: int = 1) -> Tree:
    """Grow one unlimited-depth CART tree; exposed directly for oracle tests."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    d = X.shape[1]
    nodes: list[_Node] = []

    def grow(indices: np.ndarray) -> int:
        node_id = len(nodes)
        nodes.append(_Node())
        y_node = y[indices]
        if len(indices) <= min_leaf or (y_node == y_node[0]).all():
            nodes[node_id].label = _majority_label(y_node, n_labels)
            return node_id
        if max_features is not None and max_features < d:
            assert rng is not None, "feature subsampling needs an RNG"
            features = sorted(rng.choice(d, size=max_features, replace=False).tolist())
        else:
            features = range(d)
        best = _best_split(X, y, indices, features, n_labels)
        if best is None and max_features is not None and max_features < d:
            # Sampled features were constant on this node; fall back to all.
            best = _best_split(X, y, indices, range(d), n_labels)
        if best is None:
            nodes[node_id].label = _majority_label(y_node, n_labels)
            return node_id
        _, feature, threshold = best
        mask = X[indices, feature] <= threshold
        nodes[node_id].feature = feature
        nodes[node_id].threshold = threshold
        nodes[node_id].left = grow(indices[mask])
        nodes[node_id].right = grow(indices[~mask])
        return node_id

    grow(np.arange(len(X)))
    return Tree(
        feature=np.array([n.feature for n in nodes], dtype=np.int64),
        threshold=np.array([n.threshold for n in nodes], dtype=float),
        left=np.array([n.left for n in nodes], dtype=np.int64),
        right=np.array([n.right for n in nodes], dtype=np.int64),
        label=np.array([n.label for n in nodes], dtype=np.int64),
    )


def train_forest(X: np.ndarray, y: np.ndarray, label_names: Sequence[str],
                 n_trees: int = 100, seed: int = 0,
                 max_features: int | str | None = "sqrt",
                 bootstrap: bool = True, min_leaf: int = 1) -> Forest:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if n_trees < 1:
        raise TrainingError(f"need at least one tree, got {n_trees}")
    if len(X) != len(y) or len(X) == 0:
        raise TrainingError("training features and labels must be non-empty and aligned")
    if not np.isfinite(X).all():
        raise TrainingError("training features contain non-finite values")
    if len(np.unique(y)) < 2:
        raise TrainingError(
            "training history contains a single diagnosis class; gather more labels "
            "before training")
    d = X.shape[1]
    if max_features == "sqrt":
        m = math.ceil(math.sqrt(d))
    else:
        m = max_features
    n_labels = len(label_names)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_TREE, t]))
        if bootstrap:
            sample = rng.integers(0, len(X), size=len(X))
        else:
            sample = np.arange(len(X))
        trees.append(build_tree(X[sample], y[sample], n_labels, rng=rng,
                                max_features=m, min_leaf=min_leaf))
    return Forest(trees=tuple(trees), label_names=tuple(label_names),
                  n_features=d, seed=seed)


# ---------------------------------------------------------------------------
# Serialization (versioned, lossless round-trip)

FOREST_FORMAT_VERSION = 1


def forest_to_dict(forest: Forest) -> dict:
    return {
        "format_version": FOREST_FORMAT_VERSION,
        "label_names": list(forest.label_names),
        "n_features": forest.n_features,
        "seed": forest.seed,
        "trees": [
            {
                "feature": tree.feature.tolist(),
                # JSON floats round-trip exactly (shortest-repr encoding).
                "threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "label": tree.label.tolist(),
            }
            for tree in forest.trees
        ],
    }


def forest_from_dict(data: dict) -> Forest:
    version = data.get("format_version")
    if version != FOREST_FORMAT_VERSION:
        raise ValueError(f"unsupported forest format version {version!r}")
    trees = tuple(
        Tree(
            feature=np.array(t["feature"], dtype=np.int64),
            threshold=np.array(t["threshold"], dtype=float),
            left=np.array(t["left"], dtype=np.int64),
            right=np.array(t["right"], dtype=np.int64),
            label=np.array(t["label"], dtype=np.int64),
        )
        for t in data["trees"]
    )
    return Forest(trees=trees, label_names=tuple(data["label_names"]),
                  n_features=int(data["n_features"]), seed=int(data["seed"]))


def serialize_forest(forest: Forest) -> str:
    return json.dumps(forest_to_dict(forest), sort_keys=True, separators=(",", ":"))


def forest_hash(forest: Forest) -> str:
    return hashlib.sha256(serialize_forest(forest).encode()).hexdigest()


def save_forest(forest: Forest, path, manifest_hash: str | None = None) -> None:
    data = forest_to_dict(forest)
    if manifest_hash is not None:
        # Provenance only; the forest hash is computed over the canonical
        # serialization and ignores this key.
        data["manifest_hash"] = manifest_hash
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_forest(path) -> Forest:
    with open(path) as fh:
        data = json.load(fh)
    data.pop("manifest_hash", None)
    return forest_from_dict(data)
