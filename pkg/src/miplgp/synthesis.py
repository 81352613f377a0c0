"""Dataset synthesis: build multi-instance partial-label bags from a labeled pool.

Bags are assembled from a base pool of labeled instances. Each bag gets a
true class drawn uniformly from the target classes, a controlled fraction of
instances from that class (the rest come from reserved "background" classes),
and a candidate set of the true label plus r distinct false positives. Target
classes are re-indexed to 0..q-1 in the emitted dataset; reserved classes
never appear as labels.

All randomness flows through one generator seeded from the config, so equal
(pool, config) pairs synthesize byte-identical datasets.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .data import Bag, LabelSpace, MiplDataset, round_half_up
from .errors import DatasetFormatError

POOL_COLUMNS_MIN = 2  # label plus at least one feature


@dataclass(frozen=True)
class BasePool:
    """A labeled instance pool: X rows are instances, labels are integers."""

    X: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DatasetFormatError("pool needs a non-empty (N, d) feature matrix")
        if labels.shape != (X.shape[0],):
            raise DatasetFormatError(
                f"pool has {X.shape[0]} rows but {labels.shape} labels"
            )
        if not np.isfinite(X).all():
            raise DatasetFormatError("pool contains non-finite features")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)

    @property
    def feature_dim(self) -> int:
        return self.X.shape[1]

    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def rows_for(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


def load_base_pool(path) -> BasePool:
    """Read a base pool from CSV rows of the form label,f1,...,fd (no header)."""
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) < POOL_COLUMNS_MIN:
                raise DatasetFormatError(
                    f"{path}:{lineno}: expected label,f1,...,fd with at least one feature"
                )
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise DatasetFormatError(
                    f"{path}:{lineno}: {len(record)} columns, expected {width}"
                )
            try:
                labels.append(int(record[0]))
            except ValueError as exc:
                raise DatasetFormatError(
                    f"{path}:{lineno}: bad label {record[0]!r}"
                ) from exc
            try:
                rows.append([float(v) for v in record[1:]])
            except ValueError as exc:
                raise DatasetFormatError(
                    f"{path}:{lineno}: bad feature value: {exc}"
                ) from exc
    if not rows:
        raise DatasetFormatError(f"{path}: empty pool file")
    return BasePool(X=np.array(rows), labels=np.array(labels))


@dataclass(frozen=True)
class SynthesisConfig:
    """Parameters of the bag sampler.

    num_false_positives (r) counts the wrong labels added to each candidate
    set alongside the truth; it must stay below the number of target classes.
    target/reserved classes refer to pool labels and must be disjoint;
    reserved classes supply non-positive instances. An empty reserved tuple
    switches to all-positive bags (pos_fraction is then ignored).
    """

    num_bags: int
    min_bag_size: int
    max_bag_size: int
    pos_fraction: float
    num_false_positives: int
    seed: int
    target_classes: tuple[int, ...] = ()
    reserved_classes: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.num_bags < 1:
            raise DatasetFormatError(f"num_bags must be >= 1, got {self.num_bags}")
        if self.min_bag_size < 1 or self.max_bag_size < self.min_bag_size:
            raise DatasetFormatError(
                f"bad bag-size range [{self.min_bag_size}, {self.max_bag_size}]"
            )
        if not 0.0 <= self.pos_fraction <= 1.0:
            raise DatasetFormatError(
                f"pos_fraction must be in [0, 1], got {self.pos_fraction}"
            )
        if self.num_false_positives < 0:
            raise DatasetFormatError("num_false_positives must be >= 0")
        object.__setattr__(self, "target_classes", tuple(int(c) for c in self.target_classes))
        object.__setattr__(self, "reserved_classes", tuple(int(c) for c in self.reserved_classes))
        overlap = set(self.target_classes) & set(self.reserved_classes)
        if overlap:
            raise DatasetFormatError(
                f"target and reserved classes overlap: {sorted(overlap)}"
            )

    def echo(self) -> dict:
        return {
            "num_bags": self.num_bags,
            "min_bag_size": self.min_bag_size,
            "max_bag_size": self.max_bag_size,
            "pos_fraction": self.pos_fraction,
            "num_false_positives": self.num_false_positives,
            "seed": self.seed,
            "target_classes": list(self.target_classes),
            "reserved_classes": list(self.reserved_classes),
        }


def synthesize(pool: BasePool, cfg: SynthesisConfig) -> MiplDataset:
    """Sample a bag dataset from the pool under the given config.

    Per bag, in this draw order: bag size z, true class, z_pos positive rows
    (with replacement from the truth class), z - z_pos rows from the union of
    reserved classes, a row shuffle, then r distinct false-positive labels.
    z_pos = round_half_up(pos_fraction * z), floored at 1 so the bag always
    contains the truth. Target classes are re-indexed to 0..q-1 (sorted order)
    in the output; the mapping is recorded in metadata.
    """
    targets = cfg.target_classes
    if len(targets) < 2:
        raise DatasetFormatError("need at least 2 target classes")
    q = len(targets)
    r = cfg.num_false_positives
    if r >= q:
        raise DatasetFormatError(
            f"num_false_positives={r} must be < number of target classes ({q})"
        )
    sival_style = len(cfg.reserved_classes) == 0
    if sival_style and cfg.pos_fraction != 1.0:
        warnings.warn(
            "no reserved classes: bags are all-positive and pos_fraction is ignored",
            stacklevel=2,
        )

    target_rows = {}
    for c in targets:
        rows = pool.rows_for(c)
        if rows.size == 0:
            raise DatasetFormatError(f"pool has no instances of target class {c}")
        target_rows[c] = rows
    if not sival_style:
        reserved_rows = np.concatenate([pool.rows_for(c) for c in cfg.reserved_classes])
        if reserved_rows.size == 0:
            raise DatasetFormatError("pool has no instances of any reserved class")

    class_map = {orig: idx for idx, orig in enumerate(sorted(set(targets)))}
    rng = np.random.default_rng(cfg.seed)
    bags = []
    id_width = max(4, len(str(cfg.num_bags - 1)))
    for i in range(cfg.num_bags):
        z = int(rng.integers(cfg.min_bag_size, cfg.max_bag_size + 1))
        truth = targets[int(rng.integers(q))]
        if sival_style:
            z_pos = z
        else:
            z_pos = min(z, max(1, round_half_up(cfg.pos_fraction * z)))
        row_ids = rng.choice(target_rows[truth], size=z_pos, replace=True)
        if z > z_pos:
            bg = rng.choice(reserved_rows, size=z - z_pos, replace=True)
            row_ids = np.concatenate([row_ids, bg])
        row_ids = row_ids[rng.permutation(z)]
        others = [c for c in targets if c != truth]
        candidates = {class_map[truth]}
        if r > 0:
            picked = rng.choice(len(others), size=r, replace=False)
            candidates.update(class_map[others[j]] for j in picked)
        bags.append(
            Bag(
                bag_id=f"bag{i:0{id_width}d}",
                instances=pool.X[row_ids],
                candidate_labels=frozenset(candidates),
                true_label=class_map[truth],
            )
        )
    metadata = {
        "synthesis": {
            **cfg.echo(),
            "class_map": {str(orig): idx for orig, idx in class_map.items()},
            "uninformative_candidates": r == q - 1,
            "sival_style": sival_style,
        }
    }
    return MiplDataset(
        label_space=LabelSpace(q),
        feature_dim=pool.feature_dim,
        bags=tuple(bags),
        metadata=metadata,
    )


def _simplex_means(num_classes: int, feature_dim: int, separation: float) -> np.ndarray:
    """Class means with all pairwise distances equal to `separation`.

    Construction: the q means and the origin together form a regular simplex
    with side `separation`, so the background blob at the origin is exactly as
    far from every class mean as the class means are from each other. Uses the
    standard q+1-vertex simplex in R^q (basis vectors plus (1-sqrt(q+1))/q
    along the diagonal), translated to put the spare vertex at the origin and
    zero-padded when feature_dim > q. For feature_dim == q-1 the extra vertex
    no longer fits, so the q means alone are centered on the origin instead.
    Fewer dimensions cannot hold q equidistant points.
    """
    q = num_classes
    if feature_dim < q - 1:
        raise DatasetFormatError(
            f"feature_dim={feature_dim} cannot place {q} equidistant class means "
            f"(needs at least {q - 1})"
        )
    scale = separation / np.sqrt(2.0)
    if feature_dim >= q:
        pts = scale * (np.eye(q) + (np.sqrt(q + 1.0) - 1.0) / q)
        means = np.zeros((q, feature_dim))
        means[:, :q] = pts
        return means
    # feature_dim == q-1: orthonormal basis of the hyperplane orthogonal to 1
    pts = scale * np.eye(q)
    pts -= pts.mean(axis=0)
    basis = np.zeros((q, q - 1))
    for k in range(1, q):
        basis[:k, k - 1] = 1.0
        basis[k, k - 1] = -float(k)
        basis[:, k - 1] /= np.sqrt(k * (k + 1.0))
    return pts @ basis


def _random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed rotation matrix via sign-fixed QR of a Gaussian draw."""
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def make_blobs(
    num_classes: int,
    feature_dim: int,
    separation: float,
    cfg: SynthesisConfig,
    pool_per_class: int = 200,
) -> MiplDataset:
    """Synthesize bags from unit-covariance Gaussian blobs.

    Builds a pool with `num_classes` target blobs whose means are mutually
    `separation` apart, plus one reserved background blob at the origin, then
    delegates to synthesize(). The config's target/reserved classes are
    overridden to 0..q-1 and {q}. The simplex of means is given a seeded
    random orientation so no feature axis is privileged; the origin (and with
    it the background blob, always `separation` from every mean when the
    dimension allows) is unaffected.
    """
    if num_classes < 2:
        raise DatasetFormatError("need at least 2 blob classes")
    if separation < 0:
        raise DatasetFormatError(f"separation must be >= 0, got {separation}")
    means = _simplex_means(num_classes, feature_dim, separation)
    means = means @ _random_rotation(feature_dim, np.random.default_rng([cfg.seed, 2])).T
    pool_rng = np.random.default_rng([cfg.seed, 1])
    blocks = [
        pool_rng.normal(loc=means[c], scale=1.0, size=(pool_per_class, feature_dim))
        for c in range(num_classes)
    ]
    blocks.append(pool_rng.normal(loc=0.0, scale=1.0, size=(pool_per_class, feature_dim)))
    labels = np.repeat(np.arange(num_classes + 1), pool_per_class)
    pool = BasePool(X=np.vstack(blocks), labels=labels)
    cfg = replace(
        cfg,
        target_classes=tuple(range(num_classes)),
        reserved_classes=(num_classes,),
    )
    dataset = synthesize(pool, cfg)
    metadata = dict(dataset.metadata)
    metadata["blobs"] = {
        "num_classes": num_classes,
        "feature_dim": feature_dim,
        "separation": separation,
        "pool_per_class": pool_per_class,
    }
    return replace(dataset, metadata=metadata)
