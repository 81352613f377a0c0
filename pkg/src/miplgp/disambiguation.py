"""Candidate-label disambiguation via Dirichlet pseudo-counts.

Each instance carries a Dirichlet concentration vector alpha over the label
columns. Candidates start at 1/|candidates| + eps and are re-weighted each
training iteration from classifier scores; non-candidates stay pinned at eps.

For regression targets, the per-class Gamma(alpha, 1) marginal is moment-
matched to a log-normal: a Gaussian observation y_dot with heteroscedastic
noise sigma_dot in log space,

    sigma_dot = log(1/alpha + 1)
    y_dot     = (3/2) log(alpha) - (1/2) log(alpha + 1)

which recovers mean alpha and variance alpha exactly:
exp(y_dot + sigma_dot/2) = alpha and
(exp(sigma_dot) - 1) exp(2 y_dot + sigma_dot) = alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NumericError

DEFAULT_ALPHA_EPS = 1e-4


def _check_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.dtype != bool:
        raise ValueError("mask must be a 2-D boolean array")
    if not mask.any(axis=1).all():
        raise ValueError("every instance needs at least one candidate")
    return mask


def init_alpha(mask: np.ndarray, alpha_eps: float = DEFAULT_ALPHA_EPS) -> np.ndarray:
    """Initial concentrations: uniform over candidates, floor elsewhere.

    alpha[i, c] = 1/|candidates_i| + alpha_eps for candidates, alpha_eps
    otherwise, where |candidates_i| counts the True entries of row i.
    """
    mask = _check_mask(mask)
    if alpha_eps <= 0:
        raise ValueError(f"alpha_eps must be > 0, got {alpha_eps}")
    counts = mask.sum(axis=1, keepdims=True).astype(np.float64)
    return np.where(mask, 1.0 / counts, 0.0) + alpha_eps


def update_alpha(
    mask: np.ndarray, scores: np.ndarray, alpha_eps: float = DEFAULT_ALPHA_EPS
) -> np.ndarray:
    """Re-weight candidates by a softmax of scores restricted to the candidate set.

    Row-wise: alpha[i, c] = softmax_{c in candidates_i}(scores[i, c]) + alpha_eps
    for candidates and alpha_eps for the rest. The softmax subtracts the row
    maximum over candidates first, so arbitrary score magnitudes are safe.
    """
    mask = _check_mask(mask)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != mask.shape:
        raise DimensionMismatchError(
            f"scores shape {scores.shape} != mask shape {mask.shape}"
        )
    if not np.isfinite(scores).all():
        raise NumericError("non-finite classifier scores in alpha update")
    if alpha_eps <= 0:
        raise ValueError(f"alpha_eps must be > 0, got {alpha_eps}")
    shifted = np.where(mask, scores, -np.inf)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    weights = np.exp(shifted)  # exp(-inf) = 0 zeroes the non-candidates
    weights /= weights.sum(axis=1, keepdims=True)
    return np.where(mask, weights, 0.0) + alpha_eps


def sample_dirichlet(
    alpha: np.ndarray, rng: np.random.Generator, max_retries: int = 5
) -> np.ndarray:
    """Draw one Dirichlet sample per row via normalized Gamma(alpha, 1) draws.

    theta[i] = gamma[i] / sum(gamma[i]) with gamma[i, c] ~ Gamma(alpha[i, c], 1).
    The gamma sampler is exact for shapes below 1. Rows whose gamma draws all
    underflow to zero are redrawn up to max_retries times, then fall back to
    the uniform distribution.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    squeeze = alpha.ndim == 1
    alpha = np.atleast_2d(alpha)
    if (alpha <= 0).any() or not np.isfinite(alpha).all():
        raise ValueError("concentrations must be finite and > 0")
    gamma = rng.gamma(shape=alpha)
    sums = gamma.sum(axis=1)
    dead = np.flatnonzero(sums == 0.0)
    for _ in range(max_retries):
        if dead.size == 0:
            break
        gamma[dead] = rng.gamma(shape=alpha[dead])
        sums[dead] = gamma[dead].sum(axis=1)
        dead = dead[sums[dead] == 0.0]
    if dead.size:
        gamma[dead] = 1.0
        sums[dead] = alpha.shape[1]
    theta = gamma / sums[:, None]
    return theta[0] if squeeze else theta


@dataclass(frozen=True)
class TransformedTargets:
    """Log-space regression targets with per-entry observation noise."""

    y_dot: np.ndarray
    sigma_dot: np.ndarray


def transform_targets(alpha: np.ndarray) -> TransformedTargets:
    """Moment-match Gamma(alpha, 1) marginals to log-normal observations.

    Returns y_dot = (3/2) log(alpha) - (1/2) log(alpha + 1) and
    sigma_dot = log(1/alpha + 1), elementwise. log1p keeps both accurate for
    the tiny concentrations that non-candidates carry.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if (alpha <= 0).any() or not np.isfinite(alpha).all():
        raise ValueError("concentrations must be finite and > 0")
    sigma_dot = np.log1p(1.0 / alpha)
    y_dot = 1.5 * np.log(alpha) - 0.5 * np.log1p(alpha)
    return TransformedTargets(y_dot=y_dot, sigma_dot=sigma_dot)
