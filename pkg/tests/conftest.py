"""Shared fixtures: small synthetic datasets reused across test modules."""

import numpy as np
import pytest

from miplgp.synthesis import SynthesisConfig, make_blobs


def blob_config(r=1, seed=0, num_bags=100, min_size=5, max_size=15, pos=0.2):
    return SynthesisConfig(
        num_bags=num_bags,
        min_bag_size=min_size,
        max_bag_size=max_size,
        pos_fraction=pos,
        num_false_positives=r,
        seed=seed,
    )


@pytest.fixture(scope="session")
def tiny_blobs():
    """12 well-separated 3-class bags, cheap enough to train inside any test."""
    cfg = SynthesisConfig(
        num_bags=12,
        min_bag_size=2,
        max_bag_size=4,
        pos_fraction=0.5,
        num_false_positives=1,
        seed=3,
    )
    return make_blobs(3, 3, 8.0, cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
