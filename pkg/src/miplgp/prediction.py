"""Bag-level prediction from per-instance latent posteriors.

Per instance, class probabilities are the Monte-Carlo expectation of a
softmax over independent Gaussian draws from the latent posterior. The
augmented negative column is then dropped (without renormalizing), and the
bag label is the column of the single largest entry in the remaining
instances-by-classes matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError

DEFAULT_MC_SAMPLES = 512


def instance_rng(seed: int, bag_index: int, instance_index: int) -> np.random.Generator:
    """Generator for one instance's MC draws, stable across calls and bags."""
    return np.random.default_rng([seed, bag_index, instance_index])


def mc_class_probs(
    means: np.ndarray,
    variances: np.ndarray,
    rng: np.random.Generator,
    num_samples: int = DEFAULT_MC_SAMPLES,
) -> np.ndarray:
    """Expected softmax probabilities under independent per-class Gaussians.

    Draws num_samples vectors f ~ N(means, diag(variances)), applies a
    max-subtracted softmax to each, and averages. Returns a probability
    vector over the label columns.
    """
    means = np.asarray(means, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    if means.shape != variances.shape or means.ndim != 1:
        raise DimensionMismatchError("means and variances must be equal-length vectors")
    if (variances < 0).any():
        raise ValueError("variances must be non-negative")
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    draws = means + np.sqrt(variances) * rng.standard_normal((num_samples, means.shape[0]))
    draws -= draws.max(axis=1, keepdims=True)
    expd = np.exp(draws)
    probs = expd / expd.sum(axis=1, keepdims=True)
    return probs.mean(axis=0)


def truncate_negative(theta: np.ndarray) -> np.ndarray:
    """Drop the trailing negative-class column without renormalizing."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 2 or theta.shape[1] < 2:
        raise DimensionMismatchError("theta must be (z, w) with w >= 2")
    return theta[:, :-1].copy()


def aggregate_bag(theta: np.ndarray) -> tuple[int, int]:
    """Bag label and winning instance from an instances-by-classes matrix.

    The winner is the globally largest entry; ties resolve to the smallest
    (row, column) in row-major order. Returns (label, instance_index).
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 2 or theta.size == 0:
        raise DimensionMismatchError("theta must be a non-empty 2-D matrix")
    row, col = np.unravel_index(int(np.argmax(theta)), theta.shape)
    return int(col), int(row)


@dataclass(frozen=True)
class BagPrediction:
    """One bag's outcome: the label, the full probability matrix, the winner."""

    bag_id: str
    predicted_label: int
    instance_probs: np.ndarray  # (z, w) expected probabilities, pre-truncation
    winning_instance: int
    true_label: int | None = None


def write_predictions_csv(path, predictions: list[BagPrediction]) -> None:
    """Write one row per bag: ids, labels, and the winning instance's probabilities."""
    if not predictions:
        raise ValueError("no predictions to write")
    width = predictions[0].instance_probs.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["bag_id", "predicted_label", "true_label"]
            + [f"theta_{c}" for c in range(width)]
        )
        for pred in predictions:
            if pred.instance_probs.shape[1] != width:
                raise DimensionMismatchError("predictions disagree on label width")
            row = pred.instance_probs[pred.winning_instance]
            writer.writerow(
                [
                    pred.bag_id,
                    pred.predicted_label,
                    "" if pred.true_label is None else pred.true_label,
                ]
                + [repr(float(v)) for v in row]
            )
