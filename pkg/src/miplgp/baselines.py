"""Bag-embedding baselines: k-NN with partial-label candidate voting.

Bags are collapsed to single vectors (mean, or concatenated max/min), then a
k-nearest-neighbor vote runs over the embedded training bags. Each neighbor
splits a 1/(distance + 1e-12) weight equally across its candidate labels;
the label with the largest total wins, ties going to the smallest label.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.neighbors import NearestNeighbors
from sklearn.utils.validation import check_is_fitted

from .errors import DimensionMismatchError
from .validation import check_bag_matrices, check_candidate_sets

EMBEDDINGS = ("mean", "maxmin")
DISTANCE_EPS = 1e-12


def embed_mean(bags) -> np.ndarray:
    """Per-bag instance mean, (m, d)."""
    matrices = check_bag_matrices(bags)
    return np.vstack([m.mean(axis=0) for m in matrices])


def embed_maxmin(bags) -> np.ndarray:
    """Per-bag columnwise max concatenated with min, (m, 2d)."""
    matrices = check_bag_matrices(bags)
    return np.vstack(
        [np.concatenate([m.max(axis=0), m.min(axis=0)]) for m in matrices]
    )


def embed(bags, scheme: str) -> np.ndarray:
    if scheme not in EMBEDDINGS:
        raise ValueError(f"embedding must be one of {EMBEDDINGS}, got {scheme!r}")
    return embed_mean(bags) if scheme == "mean" else embed_maxmin(bags)


def plknn_vote(
    train_vecs: np.ndarray,
    train_mask: np.ndarray,
    test_vecs: np.ndarray,
    n_neighbors: int,
) -> np.ndarray:
    """Distance-weighted candidate voting over embedded bags."""
    if train_vecs.shape[1] != test_vecs.shape[1]:
        raise DimensionMismatchError(
            f"embedded dims differ: {train_vecs.shape[1]} vs {test_vecs.shape[1]}"
        )
    k = min(n_neighbors, train_vecs.shape[0])
    nn = NearestNeighbors(n_neighbors=k).fit(train_vecs)
    dists, idx = nn.kneighbors(test_vecs)
    weights = 1.0 / (dists + DISTANCE_EPS)
    shares = train_mask / train_mask.sum(axis=1, keepdims=True)
    votes = np.einsum("tk,tkc->tc", weights, shares[idx])
    return np.argmax(votes, axis=1).astype(np.int64)


class PlKnnClassifier(BaseEstimator, ClassifierMixin):
    """Partial-label k-NN over embedded bags.

    Parameters
    ----------
    n_neighbors : int, default=10
        Neighbors consulted per test bag (capped at the training size).
    embedding : {"mean", "maxmin"}, default="mean"
        Bag embedding scheme.
    """

    def __init__(self, n_neighbors: int = 10, embedding: str = "mean") -> None:
        self.n_neighbors = n_neighbors
        self.embedding = embedding

    def fit(self, bags, candidate_sets=None, n_classes: int | None = None):
        if self.n_neighbors < 1:
            raise ValueError(f"n_neighbors must be >= 1, got {self.n_neighbors}")
        mask, q = check_candidate_sets(bags, candidate_sets, n_classes)
        self.train_vecs_ = embed(bags, self.embedding)
        self.train_mask_ = mask
        self.n_classes_ = q
        self.classes_ = np.arange(q)
        self.n_features_in_ = self.train_vecs_.shape[1]
        return self

    def predict(self, bags) -> np.ndarray:
        check_is_fitted(self, "train_vecs_")
        vecs = embed(bags, self.embedding)
        return plknn_vote(self.train_vecs_, self.train_mask_, vecs, self.n_neighbors)
