"""Immutable sparse graph representation and adjacency normalizations."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DataError

SYMMETRIC = "symmetric"
ROW = "row"
NORMALIZATION_KINDS = (SYMMETRIC, ROW)


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted graph with dense node features.

    The adjacency is binary, symmetric, deduplicated and has an empty
    diagonal; self-loops are introduced only by :func:`normalize`.
    Instances are immutable after construction, so concurrent reads are
    safe.
    """

    num_nodes: int
    adjacency: sp.csr_matrix  # N x N, float64 with unit entries
    features: np.ndarray  # N x F, float64, read-only
    graph_hash: str

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1), dtype=np.float64).ravel()

    def edge_pairs(self) -> list[tuple[int, int]]:
        """Sorted (u, v) pairs with u < v, one per undirected edge."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        return sorted(zip(upper.row.tolist(), upper.col.tolist()))


@dataclass(frozen=True)
class NormalizedAdjacency:
    """A normalized propagation operator derived from one Graph.

    ``kind`` is "symmetric" (D^-1/2 (A+I) D^-1/2) or "row" (D^-1 (A+I)).
    ``self_loops`` records whether the identity was added before
    normalizing; the default pipeline always adds it, while the
    depth-limit diagnostics use the raw adjacency (see :func:`normalize`).
    """

    kind: str
    matrix: sp.csr_matrix
    source_graph_hash: str
    self_loops: bool = True

    @property
    def num_nodes(self) -> int:
        return int(self.matrix.shape[0])


def _graph_digest(num_nodes: int, adjacency: sp.csr_matrix, features: np.ndarray) -> str:
    upper = sp.triu(adjacency, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    h = hashlib.sha256()
    h.update(np.int64(num_nodes).tobytes())
    h.update(upper.row[order].astype(np.int64).tobytes())
    h.update(upper.col[order].astype(np.int64).tobytes())
    h.update(np.ascontiguousarray(features, dtype=np.float64).tobytes())
    return h.hexdigest()


def build_graph(edge_list: Iterable[Sequence[int]], features: np.ndarray) -> Graph:
    """Build an immutable Graph from an undirected edge list and features.

    Edges are symmetrized and deduplicated. Node indices must lie in
    [0, N) where N is the feature row count; self-pairs are rejected.
    """
    X = np.array(features, dtype=np.float64, copy=True)
    if X.ndim != 2:
        raise DataError(f"features must be a 2-D matrix, got {X.ndim} dimensions")
    n = int(X.shape[0])
    if n < 1:
        raise DataError("a graph needs at least one node")

    rows: list[int] = []
    cols: list[int] = []
    for pair in edge_list:
        u, v = int(pair[0]), int(pair[1])
        if not (0 <= u < n and 0 <= v < n):
            raise DataError(f"edge ({u}, {v}) out of range for {n} nodes")
        if u == v:
            raise DataError(f"self-loop ({u}, {u}) is not allowed in the edge list")
        rows.append(u)
        cols.append(v)

    if rows:
        r = np.concatenate([rows, cols])
        c = np.concatenate([cols, rows])
        adj = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n, n), dtype=np.float64)
        adj.sum_duplicates()
        adj.data[:] = 1.0
    else:
        adj = sp.csr_matrix((n, n), dtype=np.float64)

    X.setflags(write=False)
    return Graph(n, adj, X, _graph_digest(n, adj, X))


def normalize(graph: Graph, kind: str, *, self_loops: bool = True) -> NormalizedAdjacency:
    """Return the symmetric or row-stochastic propagation operator.

    With ``self_loops=True`` (the default) the identity is added first,
    so every degree is positive and the sparsity pattern equals that of
    A + I. With ``self_loops=False`` the raw adjacency is normalized;
    isolated nodes then receive a unit diagonal entry so that row sums
    stay well defined (they keep their own features).
    """
    if kind not in NORMALIZATION_KINDS:
        raise ConfigError(f"unknown normalization kind {kind!r}; expected one of {NORMALIZATION_KINDS}")

    n = graph.num_nodes
    if self_loops:
        adj = (graph.adjacency + sp.identity(n, format="csr", dtype=np.float64)).tocsr()
        deg = np.asarray(adj.sum(axis=1)).ravel()
    else:
        adj = graph.adjacency
        deg = np.asarray(adj.sum(axis=1)).ravel()
        isolated = np.flatnonzero(deg == 0)
        if isolated.size:
            fix = sp.csr_matrix(
                (np.ones(isolated.size), (isolated, isolated)), shape=(n, n), dtype=np.float64
            )
            adj = (adj + fix).tocsr()
            deg = deg.copy()
            deg[isolated] = 1.0

    if kind == SYMMETRIC:
        scale = sp.diags(1.0 / np.sqrt(deg))
        matrix = (scale @ adj @ scale).tocsr()
    else:
        matrix = (sp.diags(1.0 / deg) @ adj).tocsr()
    return NormalizedAdjacency(kind, matrix, graph.graph_hash, self_loops)


def is_connected_non_bipartite(graph: Graph) -> tuple[bool, bool]:
    """Return (connected, bipartite) flags of the raw adjacency.

    Connectivity is decided by traversal; bipartiteness by 2-coloring
    across all components (an edgeless graph is trivially bipartite).
    """
    n = graph.num_nodes
    indptr = graph.adjacency.indptr
    indices = graph.adjacency.indices
    color = np.full(n, -1, dtype=np.int8)
    components = 0
    bipartite = True
    for start in range(n):
        if color[start] >= 0:
            continue
        components += 1
        color[start] = 0
        stack = [start]
        while stack:
            u = stack.pop()
            for v in indices[indptr[u]:indptr[u + 1]]:
                if v == u:
                    continue
                if color[v] < 0:
                    color[v] = color[u] ^ 1
                    stack.append(int(v))
                elif color[v] == color[u]:
                    bipartite = False
    return components == 1, bipartite
