"""Exact multi-output GP regression with per-class heteroscedastic noise.

One independent GP per label column, all sharing a single Matern kernel, so
the joint covariance is block-diagonal: block c is

    A_c = K + diag(sigma_dot[:, c]) + jitter * I.

Fitting Cholesky-factorizes every block. The (unnormalized) negative log
marginal likelihood summed over blocks is

    L = sum_c [ log det(A_c) + y_dot[:, c]^T A_c^{-1} y_dot[:, c] ]

with gradient, for each kernel parameter phi (G = dK/dphi):

    dL/dphi = sum_c [ tr(A_c^{-1} G) - a_c^T G a_c ],   a_c = A_c^{-1} y_dot[:, c].

A conjugate-gradient solve with a partial pivoted-Cholesky preconditioner is
available as an optional path for single-block solves at larger n; the
default everywhere is the dense factorization.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatchError, NumericError
from .kernels import MaternKernel, pairwise_distances

DEFAULT_JITTER = 1e-6
JITTER_RETRIES = 3


@dataclass
class GpModel:
    """Fitted state: one Cholesky factor and solved targets per label column."""

    kernel: MaternKernel
    X: np.ndarray            # (n, d) training inputs
    y_dot: np.ndarray        # (n, w) log-space targets
    sigma_dot: np.ndarray    # (n, w) per-entry noise variances
    jitter: float            # value actually added to the diagonal
    gram: np.ndarray         # (n, n) kernel matrix K (no noise, no jitter)
    dists: np.ndarray        # (n, n) training distances, reusable across refits
    chols: np.ndarray        # (w, n, n) lower Cholesky factors of the blocks
    coeffs: np.ndarray       # (n, w) A_c^{-1} y_dot[:, c] per column

    @property
    def num_train(self) -> int:
        return self.X.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.y_dot.shape[1]


def _factorize(block: np.ndarray) -> np.ndarray:
    return sla.cholesky(block, lower=True, check_finite=False)


def fit_gp(
    X: np.ndarray,
    y_dot: np.ndarray,
    sigma_dot: np.ndarray,
    kernel: MaternKernel,
    base_jitter: float = DEFAULT_JITTER,
    dists: np.ndarray | None = None,
    fixed_jitter: float | None = None,
    workers: int = 1,
) -> GpModel:
    """Factorize every class block for the given kernel parameters and targets.

    The jitter starts at base_jitter * s^2 and escalates tenfold on Cholesky
    failure, up to 3 retries; if the last attempt still fails the covariance
    is reported as not positive definite. fixed_jitter pins the exact value
    instead (used when reloading a stored model).
    """
    X = np.asarray(X, dtype=np.float64)
    y_dot = np.asarray(y_dot, dtype=np.float64)
    sigma_dot = np.asarray(sigma_dot, dtype=np.float64)
    if X.ndim != 2 or y_dot.ndim != 2 or y_dot.shape != sigma_dot.shape:
        raise DimensionMismatchError("X must be (n, d); y_dot and sigma_dot equal (n, w)")
    if X.shape[0] != y_dot.shape[0]:
        raise DimensionMismatchError(
            f"{X.shape[0]} inputs but {y_dot.shape[0]} target rows"
        )
    if (sigma_dot < 0).any():
        raise ValueError("noise variances must be non-negative")
    n, w = y_dot.shape
    if dists is None:
        dists = pairwise_distances(X)
    gram = kernel.value_from_dists(dists)

    def attempt(jitter: float) -> tuple[np.ndarray, np.ndarray]:
        chols = np.empty((w, n, n))
        coeffs = np.empty((n, w))

        def one(c: int) -> None:
            block = gram + np.diag(sigma_dot[:, c])
            block[np.diag_indices_from(block)] += jitter
            L = _factorize(block)
            chols[c] = L
            coeffs[:, c] = sla.cho_solve((L, True), y_dot[:, c], check_finite=False)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(one, range(w)))
        else:
            for c in range(w):
                one(c)
        return chols, coeffs

    if fixed_jitter is not None:
        ladder = [float(fixed_jitter)]
    else:
        start = base_jitter * kernel.outputscale
        ladder = [start * 10.0**k for k in range(JITTER_RETRIES + 1)]
    last_error: Exception | None = None
    for jitter in ladder:
        try:
            chols, coeffs = attempt(jitter)
        except np.linalg.LinAlgError as exc:
            last_error = exc
            continue
        return GpModel(
            kernel=kernel, X=X, y_dot=y_dot, sigma_dot=sigma_dot,
            jitter=jitter, gram=gram, dists=dists, chols=chols, coeffs=coeffs,
        )
    raise NumericError(
        f"covariance not PD after {len(ladder)} jitter attempts "
        f"(last jitter {ladder[-1]:.3e})"
    ) from last_error


def nlml(model: GpModel) -> float:
    """Negative log marginal likelihood summed over class blocks (unnormalized)."""
    total = 0.0
    for c in range(model.num_outputs):
        logdet = 2.0 * np.sum(np.log(np.diag(model.chols[c])))
        total += logdet + float(model.y_dot[:, c] @ model.coeffs[:, c])
    return float(total)


def nlml_grad(model: GpModel) -> dict[str, float]:
    """Analytic NLML gradient for each trainable kernel parameter."""
    grad_mats = model.kernel.grads_from_dists(model.dists)
    grads = {name: 0.0 for name in grad_mats}
    if not grads:
        return grads
    eye = np.eye(model.num_train)
    for c in range(model.num_outputs):
        a = model.coeffs[:, c]
        Ainv = sla.cho_solve((model.chols[c], True), eye, check_finite=False)
        for name, G in grad_mats.items():
            trace = float(np.sum(Ainv * G))
            quad = float(a @ G @ a)
            grads[name] += trace - quad
    return grads


def posterior_mean_train(model: GpModel) -> np.ndarray:
    """Posterior mean of every latent function at the training inputs: K a_c."""
    return model.gram @ model.coeffs


def predict(model: GpModel, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Latent posterior means and variances at new points, per class column.

    mean_c = K_* a_c; var_c = s^2 - ||L_c^{-1} K_*^T||^2 columnwise, clamped
    at zero. Observation noise is not added: the variance is the latent one.
    """
    Xs = np.asarray(Xs, dtype=np.float64)
    if Xs.ndim != 2 or Xs.shape[1] != model.X.shape[1]:
        raise DimensionMismatchError(
            f"test points must be (t, {model.X.shape[1]}), got {Xs.shape}"
        )
    Ks = model.kernel.cross_gram(Xs, model.X)
    means = Ks @ model.coeffs
    prior = model.kernel.outputscale
    variances = np.empty_like(means)
    for c in range(model.num_outputs):
        v = sla.solve_triangular(
            model.chols[c], Ks.T, lower=True, check_finite=False
        )
        variances[:, c] = np.maximum(prior - np.sum(v * v, axis=0), 0.0)
    return means, variances


# --- optional iterative path -------------------------------------------------


def pivoted_cholesky(A: np.ndarray, rank: int, tol: float = 1e-12) -> np.ndarray:
    """Partial pivoted Cholesky: L with A ~ L L^T, at most `rank` columns.

    Greedy on the largest remaining diagonal. Stops early once the residual
    diagonal is at most tol * trace(A). With rank >= n and a PD input, the
    factorization is exact to roundoff.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatchError("pivoted_cholesky needs a square matrix")
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    rank = min(rank, n)
    d = np.diag(A).astype(np.float64).copy()
    threshold = tol * max(float(d.sum()), np.finfo(np.float64).tiny)
    L = np.zeros((n, rank))
    for k in range(rank):
        i = int(np.argmax(d))
        if d[i] <= threshold:
            return L[:, :k]
        col = A[:, i] - L[:, :k] @ L[i, :k]
        L[:, k] = col / np.sqrt(d[i])
        d -= L[:, k] ** 2
        np.maximum(d, 0.0, out=d)
        d[i] = 0.0
    return L


@dataclass(frozen=True)
class CgResult:
    x: np.ndarray
    iterations: int
    residual: float


def cg_solve(
    model: GpModel,
    rhs: np.ndarray,
    class_index: int,
    rank: int = 100,
    tol: float = 1e-10,
    max_iter: int = 1000,
) -> CgResult:
    """Solve A_c x = rhs by preconditioned conjugate gradients.

    The preconditioner is P = L_r L_r^T + D with L_r a rank-`rank` pivoted
    Cholesky of K and D the block's noise-plus-jitter diagonal, applied via
    the Woodbury identity. When rank >= n the preconditioner equals A_c and
    the solve finishes in one application. Convergence means the residual
    norm falls to tol * ||rhs||; anything else is an error carrying the last
    residual.
    """
    rhs = np.asarray(rhs, dtype=np.float64).ravel()
    n = model.num_train
    if rhs.shape[0] != n:
        raise DimensionMismatchError(f"rhs has {rhs.shape[0]} entries, expected {n}")
    if not 0 <= class_index < model.num_outputs:
        raise ValueError(f"class_index {class_index} out of range")
    diag = model.sigma_dot[:, class_index] + model.jitter
    A = model.gram + np.diag(diag)
    Lr = pivoted_cholesky(model.gram, rank)
    # Woodbury: (D + Lr Lr^T)^{-1} v = D^{-1} v - D^{-1} Lr M^{-1} Lr^T D^{-1} v
    dinv = 1.0 / diag
    B = Lr * dinv[:, None]
    M = np.eye(Lr.shape[1]) + Lr.T @ B
    M_chol = sla.cholesky(M, lower=True, check_finite=False)

    def precond(v: np.ndarray) -> np.ndarray:
        u = dinv * v
        w = sla.cho_solve((M_chol, True), B.T @ v, check_finite=False)
        return u - B @ w

    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return CgResult(x=np.zeros(n), iterations=0, residual=0.0)
    x = np.zeros(n)
    r = rhs.copy()
    z = precond(r)
    p = z.copy()
    rz = float(r @ z)
    residual = float(np.linalg.norm(r))
    for it in range(1, max_iter + 1):
        Ap = A @ p
        step = rz / float(p @ Ap)
        x += step * p
        r -= step * Ap
        residual = float(np.linalg.norm(r))
        if residual <= tol * bnorm:
            return CgResult(x=x, iterations=it, residual=residual)
        z = precond(r)
        rz_next = float(r @ z)
        p = z + (rz_next / rz) * p
        rz = rz_next
    raise NumericError(
        f"CG did not converge in {max_iter} iterations "
        f"(residual {residual:.3e}, target {tol * bnorm:.3e})"
    )
