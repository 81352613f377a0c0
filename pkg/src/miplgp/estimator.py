"""The bag classifier: augmented labels, Dirichlet disambiguation, exact GP.

Training alternates, once per iteration: moment-match the current pseudo-
counts into regression targets, factorize the per-class GP blocks, take one
Adam step on the marginal-likelihood gradient (cosine-annealed learning
rate), then re-weight the pseudo-counts from the classifier's scores at the
training points. The model kept for prediction is the last factorization
built inside the loop.

Variants: "full" runs everything; "uniform" keeps the pseudo-counts frozen
at their uniform initialization; "naive" skips the negative-class
augmentation and works in the raw label space.

Fitted models serialize to MIPLGP-MODEL v1, a small binary format holding a
JSON header plus the arrays needed to rebuild the exact factorization.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import gp
from .data import FeatureStats, LabelSpace, build_instance_view, standardize_features
from .disambiguation import init_alpha, transform_targets, update_alpha
from .errors import DatasetFormatError, DimensionMismatchError, NumericError
from .kernels import MaternKernel, pairwise_distances
from .optim import AdamOptimizer, cosine_lr
from .parallel import worker_count
from .prediction import (
    BagPrediction,
    aggregate_bag,
    instance_rng,
    mc_class_probs,
    truncate_negative,
)
from .validation import as_bag_objects, check_bag_matrices, check_candidate_sets

VARIANTS = ("full", "uniform", "naive")
ALPHA_UPDATE_SOURCES = ("posterior_mean", "expected_theta")

MODEL_MAGIC = b"MIPLGP-MODEL\x00"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TraceRow:
    """One training iteration: loss before the step, learning rate applied."""

    iteration: int
    nlml: float
    lr: float


def write_trace_csv(path, trace: Sequence[TraceRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("iteration,nlml,lr\n")
        for row in trace:
            fh.write(f"{row.iteration},{row.nlml!r},{row.lr!r}\n")


class MiplGpClassifier(BaseEstimator, ClassifierMixin):
    """Multi-instance partial-label classifier built on per-class exact GPs.

    Parameters
    ----------
    n_iterations : int, default=500
        Training iterations; each refits the GP and takes one Adam step.
    learning_rate : float, default=0.1
        Base Adam learning rate, cosine-annealed to zero over the run.
    alpha_eps : float, default=1e-4
        Concentration floor for non-candidate labels.
    nu : float, default=2.5
        Matern smoothness; one of 0.5, 1.5, 2.5.
    mc_samples : int, default=512
        Monte-Carlo draws per instance when estimating class probabilities.
    variant : {"full", "uniform", "naive"}, default="full"
        "uniform" freezes the pseudo-counts at initialization; "naive"
        drops the negative-class augmentation.
    standardize : bool, default=True
        Standardize features with training statistics.
    train_lengthscale, train_outputscale : bool, default=False
        Optimize the kernel parameters instead of holding them at 1. With
        short-tailed Matern kernels and well separated clusters the marginal
        likelihood favors large output variances that wash out the
        Monte-Carlo class probabilities, so both default to frozen.
    jitter : float, default=1e-6
        Base diagonal jitter, scaled by the kernel output variance.
    alpha_update_source : {"posterior_mean", "expected_theta"}, default="posterior_mean"
        Scores used to re-weight candidates: the GP posterior mean at the
        training points, or a Monte-Carlo expected-probability estimate.
    beta1, beta2 : float
        Adam moment decay rates.
    random_state : int, default=0
        Seed for every stochastic element (prediction-time draws included).

    Attributes
    ----------
    model_ : gp.GpModel
        The factorized model used for prediction.
    alpha_ : ndarray of shape (n_instances, width)
        Final pseudo-counts after the last update.
    trace_ : list of TraceRow
        Per-iteration loss and learning rate.
    classes_ : ndarray of shape (n_classes,)
        Original label values 0..q-1.
    """

    def __init__(
        self,
        n_iterations: int = 500,
        learning_rate: float = 0.1,
        alpha_eps: float = 1e-4,
        nu: float = 2.5,
        mc_samples: int = 512,
        variant: str = "full",
        standardize: bool = True,
        train_lengthscale: bool = False,
        train_outputscale: bool = False,
        jitter: float = 1e-6,
        alpha_update_source: str = "posterior_mean",
        beta1: float = 0.9,
        beta2: float = 0.999,
        random_state: int = 0,
    ) -> None:
        self.n_iterations = n_iterations
        self.learning_rate = learning_rate
        self.alpha_eps = alpha_eps
        self.nu = nu
        self.mc_samples = mc_samples
        self.variant = variant
        self.standardize = standardize
        self.train_lengthscale = train_lengthscale
        self.train_outputscale = train_outputscale
        self.jitter = jitter
        self.alpha_update_source = alpha_update_source
        self.beta1 = beta1
        self.beta2 = beta2
        self.random_state = random_state

    # -- training -----------------------------------------------------------

    def fit(self, bags, candidate_sets=None, n_classes: int | None = None, bag_ids=None):
        """Fit on bags with bag-level candidate sets.

        bags may be Bag objects or raw (z_i, d) arrays; candidate_sets is
        then a sequence of label collections (or a boolean mask) and may be
        omitted when the bags carry their own sets.
        """
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.alpha_update_source not in ALPHA_UPDATE_SOURCES:
            raise ValueError(
                f"alpha_update_source must be one of {ALPHA_UPDATE_SOURCES}, "
                f"got {self.alpha_update_source!r}"
            )
        if self.n_iterations < 1:
            raise ValueError(f"n_iterations must be >= 1, got {self.n_iterations}")
        if self.mc_samples < 1:
            raise ValueError(f"mc_samples must be >= 1, got {self.mc_samples}")

        matrices = check_bag_matrices(bags)
        mask, q = check_candidate_sets(bags, candidate_sets, n_classes)
        bag_objs = as_bag_objects(matrices, mask, bag_ids)
        augment = self.variant != "naive"
        view = build_instance_view(bag_objs, q, augment=augment)

        X = view.X
        stats: FeatureStats | None = None
        if self.standardize:
            X, stats = standardize_features(X)
        dists = pairwise_distances(X)

        kernel = MaternKernel(
            nu=self.nu,
            log_lengthscale=0.0,
            log_outputscale=0.0,
            train_lengthscale=self.train_lengthscale,
            train_outputscale=self.train_outputscale,
        )
        adam = AdamOptimizer(
            len(kernel.trainable_names()), beta1=self.beta1, beta2=self.beta2
        )
        workers = worker_count(limit=view.label_space.width)
        alpha = init_alpha(view.mask, self.alpha_eps)
        update_candidates = self.variant != "uniform"

        trace: list[TraceRow] = []
        model: gp.GpModel | None = None
        for t in range(self.n_iterations):
            targets = transform_targets(alpha)
            model = gp.fit_gp(
                X,
                targets.y_dot,
                targets.sigma_dot,
                kernel,
                base_jitter=self.jitter,
                dists=dists,
                workers=workers,
            )
            loss = gp.nlml(model)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite NLML ({loss}) at iteration {t}")
            lr = cosine_lr(t, self.n_iterations, self.learning_rate)
            names = model.kernel.trainable_names()
            if names:
                grads = gp.nlml_grad(model)
                deltas = adam.step(np.array([grads[nm] for nm in names]), lr)
                kernel = model.kernel.with_updates(dict(zip(names, deltas)))
            if update_candidates:
                scores = self._alpha_scores(model, t)
                alpha = update_alpha(view.mask, scores, self.alpha_eps)
            trace.append(TraceRow(iteration=t, nlml=loss, lr=lr))

        self.model_ = model
        self.alpha_ = alpha
        self.stats_ = stats
        self.trace_ = trace
        self.label_space_ = view.label_space
        self.n_classes_ = q
        self.classes_ = np.arange(q)
        self.n_features_in_ = view.X.shape[1]
        return self

    def _alpha_scores(self, model: gp.GpModel, iteration: int) -> np.ndarray:
        means = gp.posterior_mean_train(model)
        if self.alpha_update_source == "posterior_mean":
            return means
        # expected_theta: MC softmax expectation at the training points
        prior = model.kernel.outputscale
        variances = np.empty_like(means)
        for c in range(model.num_outputs):
            v = sla.solve_triangular(
                model.chols[c], model.gram, lower=True, check_finite=False
            )
            variances[:, c] = np.maximum(prior - np.sum(v * v, axis=0), 0.0)
        rng = np.random.default_rng([self.random_state, 617, iteration])
        draws = means[None, :, :] + np.sqrt(variances)[None, :, :] * rng.standard_normal(
            (self.mc_samples,) + means.shape
        )
        draws -= draws.max(axis=2, keepdims=True)
        expd = np.exp(draws)
        return (expd / expd.sum(axis=2, keepdims=True)).mean(axis=0)

    # -- prediction ---------------------------------------------------------

    def predict_bags(
        self, bags, bag_ids=None, true_labels=None, seed: int | None = None
    ) -> list[BagPrediction]:
        """Full per-bag outcomes: labels, probability matrices, winning rows."""
        check_is_fitted(self, "model_")
        matrices = check_bag_matrices(bags)
        if matrices[0].shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"bags have feature dim {matrices[0].shape[1]}, "
                f"model expects {self.n_features_in_}"
            )
        ids = (
            [str(b) for b in bag_ids]
            if bag_ids is not None
            else [f"bag{i:04d}" for i in range(len(matrices))]
        )
        if len(ids) != len(matrices):
            raise DimensionMismatchError(f"{len(ids)} ids for {len(matrices)} bags")
        truths = list(true_labels) if true_labels is not None else [None] * len(matrices)
        if len(truths) != len(matrices):
            raise DimensionMismatchError(f"{len(truths)} labels for {len(matrices)} bags")
        seed = self.random_state if seed is None else seed

        X = np.vstack(matrices)
        if self.stats_ is not None:
            X = self.stats_.transform(X)
        means, variances = gp.predict(self.model_, X)

        out: list[BagPrediction] = []
        offset = 0
        for b, matrix in enumerate(matrices):
            z = matrix.shape[0]
            theta = np.empty((z, means.shape[1]))
            for j in range(z):
                rng = instance_rng(seed, b, j)
                theta[j] = mc_class_probs(
                    means[offset + j], variances[offset + j], rng, self.mc_samples
                )
            offset += z
            scores = truncate_negative(theta) if self.label_space_.augmented else theta
            label, winner = aggregate_bag(scores)
            out.append(
                BagPrediction(
                    bag_id=ids[b],
                    predicted_label=label,
                    instance_probs=theta,
                    winning_instance=winner,
                    true_label=None if truths[b] is None else int(truths[b]),
                )
            )
        return out

    def predict(self, bags) -> np.ndarray:
        """Predicted label per bag."""
        return np.array(
            [p.predicted_label for p in self.predict_bags(bags)], dtype=np.int64
        )

    # -- persistence (MIPLGP-MODEL v1) ---------------------------------------

    def save(self, path) -> None:
        """Serialize the fitted model; loading reproduces predictions exactly."""
        check_is_fitted(self, "model_")
        model = self.model_
        arrays: dict[str, np.ndarray] = {}
        if self.stats_ is not None:
            arrays["feature_mean"] = self.stats_.mean
            arrays["feature_std"] = self.stats_.std
        arrays["X_train"] = model.X
        arrays["alpha"] = self.alpha_
        arrays["y_dot"] = model.y_dot
        arrays["sigma_dot"] = model.sigma_dot
        header = {
            "version": MODEL_VERSION,
            "num_classes": int(self.n_classes_),
            "augmented": bool(self.label_space_.augmented),
            "kernel": {
                "nu": model.kernel.nu,
                "log_lengthscale": model.kernel.log_lengthscale,
                "log_outputscale": model.kernel.log_outputscale,
                "train_lengthscale": model.kernel.train_lengthscale,
                "train_outputscale": model.kernel.train_outputscale,
            },
            "jitter": model.jitter,
            "config": self.get_params(),
            "arrays": list(arrays),
        }
        blob = json.dumps(header).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for arr in arrays.values():
                arr = np.ascontiguousarray(arr, dtype=np.float64)
                fh.write(struct.pack("<I", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
                fh.write(arr.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "MiplGpClassifier":
        """Rebuild a fitted classifier from a MIPLGP-MODEL v1 file."""
        with open(path, "rb") as fh:
            blob = fh.read()
        if not blob.startswith(MODEL_MAGIC):
            raise DatasetFormatError(f"{path}: not a MIPLGP-MODEL file")
        pos = len(MODEL_MAGIC)
        try:
            (header_len,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            header = json.loads(blob[pos : pos + header_len].decode("utf-8"))
            pos += header_len
            if header.get("version") != MODEL_VERSION:
                raise DatasetFormatError(
                    f"{path}: unsupported model version {header.get('version')}"
                )
            arrays: dict[str, np.ndarray] = {}
            for name in header["arrays"]:
                (ndim,) = struct.unpack_from("<I", blob, pos)
                pos += 4
                shape = struct.unpack_from(f"<{ndim}Q", blob, pos)
                pos += 8 * ndim
                count = int(np.prod(shape)) if ndim else 1
                arrays[name] = np.frombuffer(
                    blob, dtype="<f8", count=count, offset=pos
                ).reshape(shape)
                pos += 8 * count
        except (struct.error, KeyError, ValueError, UnicodeDecodeError) as exc:
            if isinstance(exc, DatasetFormatError):
                raise
            raise DatasetFormatError(f"{path}: truncated or corrupt model file: {exc}") from exc
        if pos != len(blob):
            raise DatasetFormatError(f"{path}: {len(blob) - pos} trailing bytes")

        est = cls(**header["config"])
        kernel = MaternKernel(**header["kernel"])
        X = np.array(arrays["X_train"])
        model = gp.fit_gp(
            X,
            np.array(arrays["y_dot"]),
            np.array(arrays["sigma_dot"]),
            kernel,
            fixed_jitter=header["jitter"],
            workers=worker_count(limit=arrays["y_dot"].shape[1]),
        )
        est.model_ = model
        est.alpha_ = np.array(arrays["alpha"])
        if "feature_mean" in arrays:
            est.stats_ = FeatureStats(
                mean=np.array(arrays["feature_mean"]),
                std=np.array(arrays["feature_std"]),
            )
        else:
            est.stats_ = None
        est.trace_ = []
        est.label_space_ = LabelSpace(
            header["num_classes"], augmented=False
        )
        if header["augmented"]:
            est.label_space_ = est.label_space_.augment()
        est.n_classes_ = header["num_classes"]
        est.classes_ = np.arange(est.n_classes_)
        est.n_features_in_ = X.shape[1]
        return est
