from fractions import Fraction

import numpy as np
import pytest

from channelqc.forest import (
    DimensionError,
    Forest,
    TrainingError,
    Tree,
    build_tree,
    forest_from_dict,
    forest_hash,
    forest_to_dict,
    load_forest,
    save_forest,
    serialize_forest,
    train_forest,
)


# -- exhaustive best-split oracle ----------------------------------------------
# Exact rational arithmetic over every (feature, midpoint threshold) candidate;
# ties resolve to the lowest feature index, then the lowest threshold, matching
# the documented rule.

def oracle_best_split(X, y, n_labels):
    n, d = X.shape
    best = None
    for f in range(d):
        values = sorted(set(X[:, f].tolist()))
        for lo, hi in zip(values, values[1:]):
            threshold = 0.5 * (lo + hi)
            left = y[X[:, f] <= threshold]
            right = y[X[:, f] > threshold]
            cost = Fraction(0)
            for side in (left, right):
                counts = np.bincount(side, minlength=n_labels)
                gini = Fraction(1) - sum(
                    Fraction(int(c), len(side)) ** 2 for c in counts)
                cost += Fraction(len(side), n) * gini
            if best is None or cost < best[0]:
                best = (cost, f, threshold)
    return best


def oracle_tree(X, y, n_labels):
    if len(set(y.tolist())) == 1:
        return ("leaf", int(y[0]))
    best = oracle_best_split(X, y, n_labels)
    if best is None:
        counts = np.bincount(y, minlength=n_labels)
        return ("leaf", int(np.argmax(counts)))
    _, f, threshold = best
    mask = X[:, f] <= threshold
    return ("split", f, threshold,
            oracle_tree(X[mask], y[mask], n_labels),
            oracle_tree(X[~mask], y[~mask], n_labels))


def tree_to_tuples(tree: Tree, node=0):
    if tree.feature[node] < 0:
        return ("leaf", int(tree.label[node]))
    return ("split", int(tree.feature[node]), float(tree.threshold[node]),
            tree_to_tuples(tree, int(tree.left[node])),
            tree_to_tuples(tree, int(tree.right[node])))


def leaf_tree(label: int) -> Tree:
    return Tree(feature=np.array([-1]), threshold=np.array([0.0]),
                left=np.array([-1]), right=np.array([-1]), label=np.array([label]))


class TestBuildTree:
    def test_matches_exhaustive_oracle_on_small_sets(self):
        rng = np.random.default_rng(17)
        for trial in range(40):
            n = int(rng.integers(2, 9))
            d = int(rng.integers(1, 4))
            n_labels = int(rng.integers(2, 4))
            X = np.round(rng.uniform(0, 10, size=(n, d)), 2)
            y = rng.integers(0, n_labels, size=n)
            if len(set(y.tolist())) < 2:
                y[0] = (y[1] + 1) % n_labels
            tree = build_tree(X, y, n_labels)
            assert tree_to_tuples(tree) == oracle_tree(X, y.astype(np.int64), n_labels), (
                f"trial {trial}")

    def test_five_point_two_class_example(self):
        X = np.array([[1.0], [2.0], [3.0], [4.0], [5.0]])
        y = np.array([0, 0, 0, 1, 1])
        tree = build_tree(X, y, 2)
        assert tree_to_tuples(tree) == ("split", 0, 3.5, ("leaf", 0), ("leaf", 1))

    def test_duplicate_rows_mixed_labels_become_majority_leaf(self):
        X = np.array([[1.0], [1.0], [1.0]])
        y = np.array([0, 1, 1])
        tree = build_tree(X, y, 2)
        assert tree_to_tuples(tree) == ("leaf", 1)

    def test_majority_tie_goes_to_smallest_label(self):
        X = np.array([[1.0], [1.0]])
        y = np.array([0, 1])
        tree = build_tree(X, y, 2)
        assert tree_to_tuples(tree) == ("leaf", 0)


class TestTrainForest:
    def test_memorizes_training_set_without_bootstrap(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(0, 1, size=(5, 3))
        y = np.arange(5)
        forest = train_forest(X, y, [f"c{i}" for i in range(5)], n_trees=1, seed=1,
                              max_features=None, bootstrap=False)
        votes = forest.label_votes(X)
        assert np.array_equal(np.argmax(votes, axis=1), y)

    def test_deterministic_same_seed(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(0, 1, size=(40, 4))
        y = rng.integers(0, 3, size=40)
        a = train_forest(X, y, ["a", "b", "c"], n_trees=10, seed=77)
        b = train_forest(X, y, ["a", "b", "c"], n_trees=10, seed=77)
        assert serialize_forest(a) == serialize_forest(b)
        assert forest_hash(a) == forest_hash(b)
        c = train_forest(X, y, ["a", "b", "c"], n_trees=10, seed=78)
        assert forest_hash(a) != forest_hash(c)

    def test_single_class_history_rejected(self):
        X = np.zeros((10, 2))
        y = np.zeros(10, dtype=int)
        with pytest.raises(TrainingError, match="gather more"):
            train_forest(X, y, ["only"], n_trees=3, seed=0)

    def test_no_trees_rejected(self):
        X = np.zeros((4, 2))
        y = np.array([0, 1, 0, 1])
        with pytest.raises(TrainingError):
            train_forest(X, y, ["a", "b"], n_trees=0, seed=0)

    def test_non_finite_features_rejected(self):
        X = np.array([[0.0, np.nan], [1.0, 2.0]])
        y = np.array([0, 1])
        with pytest.raises(TrainingError):
            train_forest(X, y, ["a", "b"], n_trees=1, seed=0)

    def test_dimension_mismatch_on_predict(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(0, 1, size=(20, 4))
        y = rng.integers(0, 2, size=20)
        forest = train_forest(X, y, ["a", "b"], n_trees=3, seed=0)
        with pytest.raises(DimensionError):
            forest.label_votes(np.zeros((2, 5)))

    def test_feature_subsampling_still_separates(self):
        rng = np.random.default_rng(2)
        X = np.vstack([rng.normal(0, 0.1, size=(30, 9)),
                       rng.normal(3, 0.1, size=(30, 9))])
        y = np.array([0] * 30 + [1] * 30)
        forest = train_forest(X, y, ["a", "b"], n_trees=20, seed=5)
        votes = forest.label_votes(X)
        assert np.array_equal(np.argmax(votes, axis=1), y)


class TestVotes:
    def test_vote_fractions(self):
        forest = Forest(trees=(leaf_tree(0), leaf_tree(0), leaf_tree(1)),
                        label_names=("A", "B"), n_features=2, seed=0)
        votes = forest.label_votes(np.zeros((1, 2)))
        assert votes.tolist() == [[2, 1]]

    def test_unanimous(self):
        forest = Forest(trees=(leaf_tree(1),) * 4, label_names=("A", "B"),
                        n_features=1, seed=0)
        votes = forest.label_votes(np.zeros((3, 1)))
        assert np.array_equal(votes, np.tile([0, 4], (3, 1)))

    def test_votes_sum_to_tree_count(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(0, 1, size=(50, 5))
        y = rng.integers(0, 4, size=50)
        forest = train_forest(X, y, list("abcd"), n_trees=17, seed=3)
        votes = forest.label_votes(rng.uniform(0, 1, size=(200, 5)))
        assert np.all(votes.sum(axis=1) == 17)


class TestSerialization:
    def test_roundtrip_is_lossless(self, tmp_path):
        rng = np.random.default_rng(4)
        X = rng.uniform(0, 1, size=(60, 6))
        y = rng.integers(0, 3, size=60)
        forest = train_forest(X, y, ["a", "b", "c"], n_trees=8, seed=13)
        save_forest(forest, tmp_path / "forest.json")
        loaded = load_forest(tmp_path / "forest.json")
        assert serialize_forest(loaded) == serialize_forest(forest)
        probe = rng.uniform(0, 1, size=(100, 6))
        assert np.array_equal(loaded.label_votes(probe), forest.label_votes(probe))

    def test_version_gate(self):
        data = forest_to_dict(Forest(trees=(leaf_tree(0),), label_names=("A", "B"),
                                     n_features=1, seed=0))
        data["format_version"] = 99
        with pytest.raises(ValueError, match="version"):
            forest_from_dict(data)
