"""Dataset ingestion, splits, and synthetic fixtures.

File formats (UTF-8 text):
  edges:    one ``src<TAB>dst`` pair per line, 0-based; ``#`` lines are comments
  features: header line ``N F``, then N lines of F space-separated decimals
  labels:   one ``node_id<TAB>class_id`` line per node
  split:    JSON ``{seed, ratios: [...], train: [...], val: [...], test: [...]}``
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .graph import Graph, build_graph, is_connected_non_bipartite


@dataclass(frozen=True)
class LabeledDataset:
    """A graph whose every node carries exactly one dense class id."""

    graph: Graph
    labels: np.ndarray  # N, int64, values in 0..C-1
    class_names: list[str]  # dense id -> original class id as text
    name: str = "dataset"

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int
    ratios: tuple[float, float, float]


def read_edge_list(path: str | Path) -> list[tuple[int, int]]:
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'src<TAB>dst', got {raw.rstrip()!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer node id in {raw.rstrip()!r}") from None
    return edges


def read_features(path: str | Path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty feature file")
    header = lines[0].split()
    if len(header) != 2:
        raise DataError(f"{path}:1: expected header 'N F', got {lines[0]!r}")
    try:
        n, f = int(header[0]), int(header[1])
    except ValueError:
        raise DataError(f"{path}:1: non-integer header values in {lines[0]!r}") from None
    body = lines[1:]
    if len(body) != n:
        raise DataError(f"{path}: header declares {n} nodes but file has {len(body)} feature rows")
    X = np.empty((n, f), dtype=np.float64)
    for i, line in enumerate(body):
        parts = line.split()
        if len(parts) != f:
            raise DataError(f"{path}:{i + 2}: expected {f} values, got {len(parts)}")
        try:
            X[i] = [float(p) for p in parts]
        except ValueError:
            raise DataError(f"{path}:{i + 2}: non-numeric feature value") from None
    return X


def read_labels(path: str | Path, num_nodes: int) -> np.ndarray:
    raw = np.full(num_nodes, np.iinfo(np.int64).min, dtype=np.int64)
    seen = np.zeros(num_nodes, dtype=bool)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped:
                continue
            parts = stripped.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'node_id<TAB>class_id', got {line.rstrip()!r}")
            try:
                node, cls = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer field in {line.rstrip()!r}") from None
            if not 0 <= node < num_nodes:
                raise DataError(
                    f"{path}:{lineno}: node {node} out of range; feature file declares {num_nodes} nodes"
                )
            if seen[node]:
                raise DataError(f"{path}:{lineno}: duplicate label for node {node}")
            seen[node] = True
            raw[node] = cls
    missing = np.flatnonzero(~seen)
    if missing.size:
        raise DataError(f"{path}: missing label for node {missing[0]}")
    return raw


def load_dataset(
    edge_path: str | Path,
    feature_path: str | Path,
    label_path: str | Path,
    name: str | None = None,
) -> LabeledDataset:
    """Load one dataset from the three text files.

    Class ids are densified to 0..C-1; the original ids are recorded in
    ``class_names`` so the mapping stays reversible.
    """
    X = read_features(feature_path)
    edges = read_edge_list(edge_path)
    raw_labels = read_labels(label_path, X.shape[0])
    graph = build_graph(edges, X)

    original = sorted(set(raw_labels.tolist()))
    dense = {c: i for i, c in enumerate(original)}
    labels = np.array([dense[c] for c in raw_labels.tolist()], dtype=np.int64)
    return LabeledDataset(
        graph,
        labels,
        [str(c) for c in original],
        name or Path(edge_path).stem,
    )


def write_dataset(
    dataset: LabeledDataset,
    edge_path: str | Path,
    feature_path: str | Path,
    label_path: str | Path,
) -> None:
    """Write the canonical text form of a dataset (round-trips byte-for-byte)."""
    with open(edge_path, "w", encoding="utf-8") as fh:
        for u, v in dataset.graph.edge_pairs():
            fh.write(f"{u}\t{v}\n")
    X = dataset.graph.features
    with open(feature_path, "w", encoding="utf-8") as fh:
        fh.write(f"{X.shape[0]} {X.shape[1]}\n")
        for row in X:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    with open(label_path, "w", encoding="utf-8") as fh:
        for node, cls in enumerate(dataset.labels.tolist()):
            fh.write(f"{node}\t{dataset.class_names[cls]}\n")


def make_split(dataset: LabeledDataset, ratios: Sequence[float], seed: int) -> Split:
    """Seeded uniform permutation followed by a contiguous three-way cut."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got sum {sum(ratios)}")
    n = dataset.graph.num_nodes
    n_train = round(n * ratios[0])
    n_val = round(n * ratios[1])
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise DataError(f"split of {n} nodes at ratios {tuple(ratios)} leaves an empty part")
    perm = np.random.default_rng(seed).permutation(n)
    return Split(
        perm[:n_train].copy(),
        perm[n_train:n_train + n_val].copy(),
        perm[n_train + n_val:].copy(),
        int(seed),
        (float(ratios[0]), float(ratios[1]), float(ratios[2])),
    )


def save_split(split: Split, path: str | Path) -> None:
    payload = {
        "seed": split.seed,
        "ratios": list(split.ratios),
        "train": split.train.tolist(),
        "val": split.val.tolist(),
        "test": split.test.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_split(path: str | Path) -> Split:
    try:
        payload = json.loads(Path(path).read_text())
    except ValueError as exc:
        raise DataError(f"{path}: not a valid split file") from exc
    try:
        return Split(
            np.asarray(payload["train"], dtype=np.int64),
            np.asarray(payload["val"], dtype=np.int64),
            np.asarray(payload["test"], dtype=np.int64),
            int(payload["seed"]),
            tuple(float(r) for r in payload["ratios"]),
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: split file is missing field {exc}") from exc


def synth_sbm(
    n_per_block: int,
    num_blocks: int,
    p_in: float,
    p_out: float,
    feature_dim: int,
    seed: int,
) -> LabeledDataset:
    """Stochastic block model fixture with Gaussian block features.

    Labels are block ids. Block mean vectors are drawn Gaussian and then
    centered across blocks (so the global feature mean is near zero),
    with unit-variance noise added per node. Disconnected samples are
    allowed but reported with a warning.
    """
    if n_per_block < 1 or num_blocks < 1:
        raise ConfigError("need at least one block of at least one node")
    if not (0.0 <= p_out <= p_in <= 1.0) or p_in == 0.0:
        raise ConfigError(f"need 0 <= p_out <= p_in <= 1 with p_in > 0, got p_in={p_in}, p_out={p_out}")

    rng = np.random.default_rng(seed)
    n = n_per_block * num_blocks
    blocks = np.repeat(np.arange(num_blocks), n_per_block)

    prob = np.where(blocks[:, None] == blocks[None, :], p_in, p_out)
    draws = rng.random((n, n))
    upper = np.triu(draws < prob, k=1)
    edges = list(zip(*np.nonzero(upper)))

    means = rng.normal(size=(num_blocks, feature_dim))
    means -= means.mean(axis=0, keepdims=True)
    X = means[blocks] + rng.normal(size=(n, feature_dim))

    graph = build_graph(edges, X)
    connected, _ = is_connected_non_bipartite(graph)
    if not connected:
        warnings.warn(f"synthetic block-model graph (seed={seed}) is disconnected", stacklevel=2)

    return LabeledDataset(
        graph,
        blocks.astype(np.int64),
        [str(b) for b in range(num_blocks)],
        f"sbm{num_blocks}x{n_per_block}",
    )
