"""Shared fixtures: small hand graphs and the pinned block-model dataset.

The block-model fixture below was pinned once by running the full
pipeline over candidate seeds: with (2 blocks x 100 nodes, p_in=0.2,
p_out=0.005, 16 features, seed 2) and split seed 2 the graph is
connected and non-bipartite, the train split is class-balanced, the
closed-form classifier reaches 100% test accuracy at depth 2, and the
depth-128 gradient/accuracy contrasts hold with an order-of-magnitude
margin.
"""

from __future__ import annotations

import numpy as np
import pytest

from gflin.data import LabeledDataset, Split, make_split, synth_sbm, write_dataset

SBM_ARGS = dict(n_per_block=100, num_blocks=2, p_in=0.2, p_out=0.005, feature_dim=16, seed=2)
SBM_SPLIT_SEED = 2
SBM_RATIOS = (0.1, 0.1, 0.8)

TRIANGLE_EDGES = [(0, 1), (0, 2), (1, 2)]


@pytest.fixture(scope="session")
def triangle_features() -> np.ndarray:
    return np.random.default_rng(0).normal(size=(3, 2))


@pytest.fixture(scope="session")
def triangle(triangle_features):
    from gflin.graph import build_graph

    return build_graph(TRIANGLE_EDGES, triangle_features)


@pytest.fixture(scope="session")
def single_edge():
    from gflin.graph import build_graph

    return build_graph([(0, 1)], np.array([[1.0], [0.0]]))


@pytest.fixture(scope="session")
def sbm_dataset() -> LabeledDataset:
    return synth_sbm(**SBM_ARGS)


@pytest.fixture(scope="session")
def sbm_split(sbm_dataset) -> Split:
    return make_split(sbm_dataset, SBM_RATIOS, SBM_SPLIT_SEED)


@pytest.fixture(scope="session")
def sbm_files(sbm_dataset, tmp_path_factory):
    """The pinned dataset written to the three text files for CLI runs."""
    root = tmp_path_factory.mktemp("sbm")
    paths = {
        "edges": str(root / "edges.tsv"),
        "features": str(root / "features.txt"),
        "labels": str(root / "labels.tsv"),
    }
    write_dataset(sbm_dataset, paths["edges"], paths["features"], paths["labels"])
    return paths


@pytest.fixture(scope="session")
def triangle_files(triangle, tmp_path_factory):
    root = tmp_path_factory.mktemp("triangle")
    labels = np.array([0, 1, 0], dtype=np.int64)
    ds = LabeledDataset(triangle, labels, ["0", "1"], "triangle")
    paths = {
        "edges": str(root / "edges.tsv"),
        "features": str(root / "features.txt"),
        "labels": str(root / "labels.tsv"),
    }
    write_dataset(ds, paths["edges"], paths["features"], paths["labels"])
    return paths
