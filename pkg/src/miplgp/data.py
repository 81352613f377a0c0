"""Core data model: label spaces, bags, datasets, instance views, splits, and JSONL I/O.

A dataset is a collection of bags. Each bag carries a (z_i, d) instance matrix,
a bag-level candidate label set, and optionally the ground-truth label. Labels
live in an integer space {0, ..., q-1}; augmentation appends one extra negative
class at index q, giving width q+1.

Datasets are serialized as MIPL-JSONL v1: a header line followed by one JSON
object per bag. Floats are written with full round-trip precision, so writing
the same dataset twice produces byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DatasetFormatError, DimensionMismatchError

JSONL_VERSION = 1


@dataclass(frozen=True)
class LabelSpace:
    """An integer label space, optionally augmented with a negative class.

    num_classes counts the original classes q. When augmented, valid indices
    run over {0, ..., q} and the negative class is pinned at index q.
    """

    num_classes: int
    augmented: bool = False

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise DatasetFormatError(
                f"label space needs at least 2 classes, got {self.num_classes}"
            )

    @property
    def width(self) -> int:
        """Number of label columns: q, or q+1 when augmented."""
        return self.num_classes + 1 if self.augmented else self.num_classes

    @property
    def negative_index(self) -> int:
        if not self.augmented:
            raise ValueError("label space is not augmented; no negative class")
        return self.num_classes

    def augment(self) -> "LabelSpace":
        if self.augmented:
            raise ValueError("label space is already augmented")
        return LabelSpace(self.num_classes, augmented=True)


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Bag:
    """One bag: an instance matrix plus bag-level labels.

    instances has shape (z, d) with z >= 1; rows are instances. The candidate
    set is non-empty, and the true label, when known, is a member of it.
    """

    bag_id: str
    instances: np.ndarray
    candidate_labels: frozenset[int]
    true_label: int | None = None

    def __post_init__(self) -> None:
        inst = np.asarray(self.instances, dtype=np.float64)
        if inst.ndim != 2 or inst.shape[0] < 1 or inst.shape[1] < 1:
            raise DatasetFormatError(
                f"bag {self.bag_id!r}: instances must be a (z>=1, d>=1) matrix, "
                f"got shape {inst.shape}"
            )
        if not np.isfinite(inst).all():
            raise DatasetFormatError(f"bag {self.bag_id!r}: non-finite feature values")
        inst = inst.copy()
        inst.setflags(write=False)
        object.__setattr__(self, "instances", inst)
        cands = frozenset(int(c) for c in self.candidate_labels)
        if not cands:
            raise DatasetFormatError(f"bag {self.bag_id!r}: empty candidate set")
        if any(c < 0 for c in cands):
            raise DatasetFormatError(f"bag {self.bag_id!r}: negative candidate label")
        object.__setattr__(self, "candidate_labels", cands)
        if self.true_label is not None:
            truth = int(self.true_label)
            if truth not in cands:
                raise DatasetFormatError(
                    f"bag {self.bag_id!r}: true label {truth} not in candidate set"
                )
            object.__setattr__(self, "true_label", truth)

    @property
    def size(self) -> int:
        return self.instances.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.instances.shape[1]


@dataclass(frozen=True)
class MiplDataset:
    """A bag collection over a shared (non-augmented) label space."""

    label_space: LabelSpace
    feature_dim: int
    bags: tuple[Bag, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.label_space.augmented:
            raise DatasetFormatError("datasets use the raw label space, not augmented")
        object.__setattr__(self, "bags", tuple(self.bags))
        if not self.bags:
            raise DatasetFormatError("dataset has no bags")
        seen: set[str] = set()
        q = self.label_space.num_classes
        for bag in self.bags:
            if bag.bag_id in seen:
                raise DatasetFormatError(f"duplicate bag_id {bag.bag_id!r}")
            seen.add(bag.bag_id)
            if bag.feature_dim != self.feature_dim:
                raise DimensionMismatchError(
                    f"bag {bag.bag_id!r} has feature dim {bag.feature_dim}, "
                    f"dataset declares {self.feature_dim}"
                )
            if any(c >= q for c in bag.candidate_labels):
                raise DatasetFormatError(
                    f"bag {bag.bag_id!r}: candidate label outside 0..{q - 1}"
                )

    @property
    def num_bags(self) -> int:
        return len(self.bags)

    @property
    def num_instances(self) -> int:
        return sum(bag.size for bag in self.bags)

    def bag_map(self) -> dict[str, Bag]:
        return {bag.bag_id: bag for bag in self.bags}

    def subset(self, bag_ids: Sequence[str]) -> tuple[Bag, ...]:
        by_id = self.bag_map()
        missing = [b for b in bag_ids if b not in by_id]
        if missing:
            raise DatasetFormatError(f"unknown bag ids: {missing[:5]}")
        return tuple(by_id[b] for b in bag_ids)

    def candidate_mask(self, bags: Sequence[Bag] | None = None) -> np.ndarray:
        """Boolean (m, q) mask of bag-level candidate sets."""
        bags = self.bags if bags is None else bags
        mask = np.zeros((len(bags), self.label_space.num_classes), dtype=bool)
        for i, bag in enumerate(bags):
            mask[i, sorted(bag.candidate_labels)] = True
        return mask

    def true_labels(self, bags: Sequence[Bag] | None = None) -> np.ndarray:
        bags = self.bags if bags is None else bags
        labels = [bag.true_label for bag in bags]
        if any(lab is None for lab in labels):
            raise DatasetFormatError("dataset has bags without true labels")
        return np.array(labels, dtype=np.int64)


@dataclass(frozen=True)
class InstanceView:
    """Flattened per-instance view of a dataset.

    X stacks all instances ((n, d)); bag_index maps each row back to its bag;
    mask is the per-instance candidate mask, width q+1 when augmented (the
    negative class column is set for every instance) or q when not.
    """

    X: np.ndarray
    bag_index: np.ndarray
    mask: np.ndarray
    label_space: LabelSpace

    def __post_init__(self) -> None:
        if self.X.shape[0] != self.bag_index.shape[0] or self.X.shape[0] != self.mask.shape[0]:
            raise DimensionMismatchError("instance view arrays disagree on row count")
        if self.mask.shape[1] != self.label_space.width:
            raise DimensionMismatchError(
                f"mask width {self.mask.shape[1]} != label width {self.label_space.width}"
            )

    @property
    def num_instances(self) -> int:
        return self.X.shape[0]


def build_instance_view(
    bags: Sequence[Bag], num_classes: int, augment: bool = True
) -> InstanceView:
    """Flatten bags to instances, propagating each bag's candidate set to its rows.

    With augment=True the label space gains a negative class at index q and
    every instance receives it as an extra candidate; with augment=False the
    mask is the raw bag candidate set, width q.
    """
    if not bags:
        raise DatasetFormatError("cannot build an instance view from zero bags")
    space = LabelSpace(num_classes, augmented=False)
    if augment:
        space = space.augment()
    rows = []
    bag_index = []
    masks = []
    for b, bag in enumerate(bags):
        if any(c >= num_classes for c in bag.candidate_labels):
            raise DatasetFormatError(
                f"bag {bag.bag_id!r}: candidate label outside 0..{num_classes - 1}"
            )
        row_mask = np.zeros(space.width, dtype=bool)
        row_mask[sorted(bag.candidate_labels)] = True
        if augment:
            row_mask[space.negative_index] = True
        rows.append(bag.instances)
        bag_index.extend([b] * bag.size)
        masks.append(np.tile(row_mask, (bag.size, 1)))
    X = np.vstack(rows)
    if not np.isfinite(X).all():
        raise DatasetFormatError("non-finite feature values in instance view")
    return InstanceView(
        X=_frozen_array(X),
        bag_index=_frozen_array(bag_index, dtype=np.int64),
        mask=_frozen_array(np.vstack(masks), dtype=bool),
        label_space=space,
    )


@dataclass(frozen=True)
class FeatureStats:
    """Per-dimension training statistics for standardization.

    Dimensions with zero variance are passed through entirely unchanged
    (not even centered), so constant features survive round trips intact.
    """

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.mean.shape[0]:
            raise DimensionMismatchError(
                f"feature dim {X.shape[1]} != stats dim {self.mean.shape[0]}"
            )
        out = X.copy()
        active = self.std > 0
        out[:, active] = (X[:, active] - self.mean[active]) / self.std[active]
        return out


def standardize_features(
    X: np.ndarray, stats: FeatureStats | None = None
) -> tuple[np.ndarray, FeatureStats]:
    """Standardize columns to zero mean / unit variance using train statistics.

    When stats is None they are computed from X (population std, ddof=0);
    otherwise the provided training statistics are reused, so test data is
    mapped with the training mean/std.
    """
    X = np.asarray(X, dtype=np.float64)
    if stats is None:
        stats = FeatureStats(
            mean=_frozen_array(X.mean(axis=0)),
            std=_frozen_array(X.std(axis=0)),
        )
    return stats.transform(X), stats


@dataclass(frozen=True)
class Split:
    """A bag-level train/test partition, identified by the seed that made it."""

    seed: int
    train_bag_ids: tuple[str, ...]
    test_bag_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        overlap = set(self.train_bag_ids) & set(self.test_bag_ids)
        if overlap:
            raise DatasetFormatError(f"split sides overlap: {sorted(overlap)[:5]}")


def round_half_up(x: float) -> int:
    """Round to nearest integer with exact halves going up."""
    return int(np.floor(x + 0.5))


def random_split(dataset: MiplDataset, fraction: float, seed: int) -> Split:
    """Deterministic bag-level split: round_half_up(fraction * m) train bags.

    The permutation comes from numpy's seeded default generator, so the same
    (dataset, fraction, seed) triple always yields the same split.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    m = dataset.num_bags
    n_train = round_half_up(fraction * m)
    if n_train == 0 or n_train == m:
        raise ValueError(
            f"fraction {fraction} leaves an empty side for {m} bags"
        )
    order = np.random.default_rng(seed).permutation(m)
    ids = [dataset.bags[i].bag_id for i in order]
    return Split(
        seed=seed,
        train_bag_ids=tuple(ids[:n_train]),
        test_bag_ids=tuple(ids[n_train:]),
    )


# --- MIPL-JSONL v1 ---------------------------------------------------------


def write_jsonl(dataset: MiplDataset, path) -> None:
    """Write a dataset as MIPL-JSONL v1 (header line, then one bag per line)."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "version": JSONL_VERSION,
            "num_classes": dataset.label_space.num_classes,
            "feature_dim": dataset.feature_dim,
            "metadata": dataset.metadata,
        }
        fh.write(json.dumps(header) + "\n")
        for bag in dataset.bags:
            record = {
                "bag_id": bag.bag_id,
                "instances": [[float(v) for v in row] for row in bag.instances],
                "candidate_labels": sorted(bag.candidate_labels),
                "true_label": bag.true_label,
            }
            fh.write(json.dumps(record) + "\n")


def read_jsonl(path) -> MiplDataset:
    """Read a MIPL-JSONL v1 file; errors name the offending line number."""
    bags: list[Bag] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in (raw.rstrip("\n") for raw in fh) if ln.strip()]
    if not lines:
        raise DatasetFormatError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}:1: malformed header: {exc}") from exc
    if not isinstance(header, dict) or header.get("version") != JSONL_VERSION:
        raise DatasetFormatError(
            f"{path}:1: expected MIPL-JSONL version {JSONL_VERSION} header"
        )
    for key in ("num_classes", "feature_dim"):
        if not isinstance(header.get(key), int):
            raise DatasetFormatError(f"{path}:1: header missing integer {key!r}")
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
        try:
            bag = Bag(
                bag_id=str(obj["bag_id"]),
                instances=np.asarray(obj["instances"], dtype=np.float64),
                candidate_labels=frozenset(obj["candidate_labels"]),
                true_label=obj.get("true_label"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetFormatError(f"{path}:{lineno}: bad bag record: {exc}") from exc
        bags.append(bag)
    try:
        return MiplDataset(
            label_space=LabelSpace(header["num_classes"]),
            feature_dim=header["feature_dim"],
            bags=tuple(bags),
            metadata=header.get("metadata", {}),
        )
    except (DatasetFormatError, DimensionMismatchError) as exc:
        raise DatasetFormatError(f"{path}: {exc}") from exc


def bags_to_arrays(bags: Iterable[Bag]) -> list[np.ndarray]:
    """Instance matrices of the given bags, in order."""
    return [bag.instances for bag in bags]
