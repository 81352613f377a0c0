"""Input validation helpers for the estimator-facing API.

Estimators accept bags either as `Bag` objects or as raw (z_i, d) arrays with
a separate candidate structure. These helpers normalize both forms into
(bags, mask) pairs and enforce the shape rules once, at the boundary.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .data import Bag
from .errors import DatasetFormatError, DimensionMismatchError


def check_bag_matrices(bags: Sequence) -> list[np.ndarray]:
    """Coerce a sequence of bags (Bag objects or array-likes) to float64 matrices."""
    if len(bags) == 0:
        raise DatasetFormatError("no bags given")
    out: list[np.ndarray] = []
    dim = None
    for i, bag in enumerate(bags):
        inst = bag.instances if isinstance(bag, Bag) else np.asarray(bag, dtype=np.float64)
        if inst.ndim != 2 or inst.shape[0] < 1:
            raise DatasetFormatError(
                f"bag {i}: expected a (z>=1, d) instance matrix, got shape {getattr(inst, 'shape', None)}"
            )
        if not np.isfinite(inst).all():
            raise DatasetFormatError(f"bag {i}: non-finite feature values")
        if dim is None:
            dim = inst.shape[1]
        elif inst.shape[1] != dim:
            raise DimensionMismatchError(
                f"bag {i} has feature dim {inst.shape[1]}, expected {dim}"
            )
        out.append(np.asarray(inst, dtype=np.float64))
    return out


def check_candidate_sets(
    bags: Sequence, candidate_sets: Sequence | None, n_classes: int | None
) -> tuple[np.ndarray, int]:
    """Resolve candidate sets to a boolean (m, q) mask and the class count q.

    candidate_sets may be None (bags must then be Bag objects carrying their
    own sets), a sequence of label collections, or an (m, q) boolean mask.
    n_classes, when omitted, is inferred as 1 + max label seen.
    """
    m = len(bags)
    if candidate_sets is None:
        if not all(isinstance(b, Bag) for b in bags):
            raise DatasetFormatError(
                "candidate_sets is required when bags are raw arrays"
            )
        candidate_sets = [sorted(b.candidate_labels) for b in bags]
    arr = np.asarray(candidate_sets, dtype=object)
    if isinstance(candidate_sets, np.ndarray) and candidate_sets.dtype == bool:
        mask = candidate_sets
        if mask.shape[0] != m:
            raise DimensionMismatchError(
                f"mask has {mask.shape[0]} rows for {m} bags"
            )
        if n_classes is not None and mask.shape[1] != n_classes:
            raise DimensionMismatchError(
                f"mask width {mask.shape[1]} != n_classes {n_classes}"
            )
        q = mask.shape[1]
    else:
        if len(arr) != m:
            raise DimensionMismatchError(
                f"{len(arr)} candidate sets for {m} bags"
            )
        sets = [frozenset(int(c) for c in cands) for cands in candidate_sets]
        for i, cands in enumerate(sets):
            if not cands:
                raise DatasetFormatError(f"bag {i}: empty candidate set")
            if min(cands) < 0:
                raise DatasetFormatError(f"bag {i}: negative candidate label")
        max_label = max(max(cands) for cands in sets)
        q = n_classes if n_classes is not None else max_label + 1
        if max_label >= q:
            raise DatasetFormatError(
                f"candidate label {max_label} outside 0..{q - 1}"
            )
        mask = np.zeros((m, q), dtype=bool)
        for i, cands in enumerate(sets):
            mask[i, sorted(cands)] = True
    if q < 2:
        raise DatasetFormatError(f"need at least 2 classes, got {q}")
    if not mask.any(axis=1).all():
        raise DatasetFormatError("every bag needs a non-empty candidate set")
    return mask, q


def as_bag_objects(
    bags: Sequence, mask: np.ndarray, bag_ids: Sequence[str] | None = None
) -> list[Bag]:
    """Wrap raw matrices + mask rows into Bag objects with generated ids."""
    matrices = check_bag_matrices(bags)
    ids = (
        [str(b) for b in bag_ids]
        if bag_ids is not None
        else [f"bag{i:04d}" for i in range(len(matrices))]
    )
    if len(ids) != len(matrices):
        raise DimensionMismatchError(f"{len(ids)} ids for {len(matrices)} bags")
    return [
        Bag(
            bag_id=ids[i],
            instances=matrices[i],
            candidate_labels=frozenset(np.flatnonzero(mask[i]).tolist()),
        )
        for i in range(len(matrices))
    ]
