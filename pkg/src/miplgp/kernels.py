"""Matern covariance with half-integer smoothness in closed form.

Only nu in {0.5, 1.5, 2.5} is supported; each has an exact expression in
t = sqrt(2 nu) * d / lengthscale, avoiding Bessel evaluations:

    nu = 0.5:  exp(-t)
    nu = 1.5:  (1 + t) exp(-t)
    nu = 2.5:  (1 + t + t^2/3) exp(-t)

scaled by an output variance s^2. Both the lengthscale and the output scale
are stored in log space so gradient steps keep them positive; either can be
frozen via its flag. Analytic derivatives with respect to the log parameters
are provided for the marginal-likelihood gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

SUPPORTED_NU = (0.5, 1.5, 2.5)


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    """Symmetric Euclidean distance matrix with an exactly zero diagonal."""
    X = np.asarray(X, dtype=np.float64)
    return squareform(pdist(X))


@dataclass(frozen=True)
class MaternKernel:
    """Matern kernel k(x, x') = s^2 * m_nu(sqrt(2 nu) ||x - x'|| / l)."""

    nu: float = 2.5
    log_lengthscale: float = 0.0
    log_outputscale: float = 0.0
    train_lengthscale: bool = False
    train_outputscale: bool = False

    def __post_init__(self) -> None:
        if self.nu not in SUPPORTED_NU:
            raise ValueError(
                f"nu={self.nu} unsupported; closed forms exist for {SUPPORTED_NU}"
            )
        if not np.isfinite(self.log_lengthscale) or not np.isfinite(self.log_outputscale):
            raise ValueError("kernel parameters must be finite")

    @property
    def lengthscale(self) -> float:
        return float(np.exp(self.log_lengthscale))

    @property
    def outputscale(self) -> float:
        """The output variance s^2."""
        return float(np.exp(self.log_outputscale))

    def trainable_names(self) -> tuple[str, ...]:
        names = []
        if self.train_lengthscale:
            names.append("log_lengthscale")
        if self.train_outputscale:
            names.append("log_outputscale")
        return tuple(names)

    def with_updates(self, deltas: dict[str, float]) -> "MaternKernel":
        """New kernel with deltas added to the named log parameters."""
        changes = {}
        for name, delta in deltas.items():
            if name not in ("log_lengthscale", "log_outputscale"):
                raise ValueError(f"unknown kernel parameter {name!r}")
            changes[name] = getattr(self, name) + float(delta)
        return replace(self, **changes)

    def _scaled(self, dists: np.ndarray) -> np.ndarray:
        return np.sqrt(2.0 * self.nu) * np.asarray(dists, dtype=np.float64) / self.lengthscale

    def value_from_dists(self, dists: np.ndarray) -> np.ndarray:
        """Kernel values for precomputed Euclidean distances."""
        t = self._scaled(dists)
        e = np.exp(-t)
        if self.nu == 0.5:
            m = e
        elif self.nu == 1.5:
            m = (1.0 + t) * e
        else:
            m = (1.0 + t + t * t / 3.0) * e
        return self.outputscale * m

    def __call__(self, x: np.ndarray, z: np.ndarray) -> float:
        """Kernel value for a single pair of points."""
        x = np.asarray(x, dtype=np.float64).ravel()
        z = np.asarray(z, dtype=np.float64).ravel()
        if x.shape != z.shape:
            raise ValueError(f"point dims differ: {x.shape} vs {z.shape}")
        return float(self.value_from_dists(np.linalg.norm(x - z)))

    def gram(self, X: np.ndarray) -> np.ndarray:
        """Symmetric Gram matrix over the rows of X; diagonal is exactly s^2."""
        return self.value_from_dists(pairwise_distances(X))

    def cross_gram(self, Xs: np.ndarray, X: np.ndarray) -> np.ndarray:
        """(len(Xs), len(X)) covariance between two point sets."""
        Xs = np.asarray(Xs, dtype=np.float64)
        X = np.asarray(X, dtype=np.float64)
        if Xs.shape[1] != X.shape[1]:
            raise ValueError(
                f"feature dims differ: {Xs.shape[1]} vs {X.shape[1]}"
            )
        return self.value_from_dists(cdist(Xs, X))

    def grads_from_dists(self, dists: np.ndarray) -> dict[str, np.ndarray]:
        """Derivatives of the kernel matrix w.r.t. each trainable log parameter.

        d k / d log(l)  = s^2 * t * (-m'(t)) * ... reduces per branch to
            nu=0.5: s^2 t e^{-t};  nu=1.5: s^2 t^2 e^{-t};
            nu=2.5: s^2 (t^2/3)(1 + t) e^{-t}
        d k / d log(s^2) = k itself.
        """
        t = self._scaled(dists)
        e = np.exp(-t)
        grads: dict[str, np.ndarray] = {}
        if self.train_lengthscale:
            if self.nu == 0.5:
                g = t * e
            elif self.nu == 1.5:
                g = t * t * e
            else:
                g = (t * t / 3.0) * (1.0 + t) * e
            grads["log_lengthscale"] = self.outputscale * g
        if self.train_outputscale:
            grads["log_outputscale"] = self.value_from_dists(dists)
        return grads
