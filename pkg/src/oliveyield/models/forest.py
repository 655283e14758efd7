"""Bagged regression tree ensembles: random forest and extra-trees."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ..seeding import derive_seed
from ..validation import check_fit_arrays, check_matrix
from .tree import grow_tree, predict_trees


class _BaggedTreesRegressor(BaseEstimator, RegressorMixin):
    """Mean of bootstrap-trained regression trees; subclasses fix the splitter."""

    splitter = "best"
    family = ""

    def __init__(
        self,
        n_trees=300,
        max_depth=16,
        min_samples_leaf=2,
        max_features=4,
        seed=0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.seed = seed

    def _validate_params(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be at least 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be at least 1 or None")

    def fit(self, X, y):
        self._validate_params()
        X, y = check_fit_arrays(X, y)
        n = X.shape[0]
        trees = []
        for i in range(self.n_trees):
            rng = np.random.default_rng(derive_seed(self.seed, "tree", i))
            sample = rng.integers(0, n, size=n)
            trees.append(
                grow_tree(
                    X,
                    y,
                    sample,
                    max_depth=self.max_depth,
                    min_samples_leaf=self.min_samples_leaf,
                    max_features=self.max_features,
                    splitter=self.splitter,
                    rng=rng,
                )
            )
        self.trees_ = trees
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = check_matrix(X, n_features=self.n_features_in_)
        if X.shape[0] == 0:
            return np.empty(0)
        return predict_trees(self.trees_, X).mean(axis=0)


class RandomForestRegressor(_BaggedTreesRegressor):
    """Bagged trees with optimized variance-reduction splits."""

    splitter = "best"
    family = "random_forest"


class ExtraTreesRegressor(_BaggedTreesRegressor):
    """Bagged trees whose split thresholds are drawn uniformly at random
    within each candidate feature's range instead of optimized."""

    splitter = "random"
    family = "extra_trees"
