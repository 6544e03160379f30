"""Propagated feature matrices for the three linearized graph filters.

All filters are evaluated with repeated sparse-times-dense products
against the feature matrix; the dense K-th operator power is never
formed. Cost is O(K * nnz * F).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .graph import NORMALIZATION_KINDS, SYMMETRIC, NormalizedAdjacency

SGC = "sgc"
SSGC = "ssgc"
DGC = "dgc"
FILTER_KINDS = (SGC, SSGC, DGC)

DEFAULT_TAU = 0.05
DEFAULT_TERMINAL_TIME = 5.27

_CACHE_MAGIC = b"GFLNFLT1"


@dataclass(frozen=True)
class FilterConfig:
    """Which filter to run and its hyperparameters.

    ``tau`` is the self-feature mixing weight (ssgc only, in [0, 1]);
    ``terminal_time`` is the diffusion horizon (dgc only, >= 0).
    """

    kind: str
    depth: int
    tau: float | None = None
    terminal_time: float | None = None
    normalization: str = SYMMETRIC

    def __post_init__(self) -> None:
        if self.kind not in FILTER_KINDS:
            raise ConfigError(f"unknown filter kind {self.kind!r}; expected one of {FILTER_KINDS}")
        if int(self.depth) < 1 or int(self.depth) != self.depth:
            raise ConfigError(f"depth must be a positive integer, got {self.depth!r}")
        if self.normalization not in NORMALIZATION_KINDS:
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if self.kind == SSGC:
            if self.tau is None:
                raise ConfigError("ssgc requires tau")
            if not 0.0 <= float(self.tau) <= 1.0:
                raise ConfigError(f"tau must lie in [0, 1], got {self.tau}")
        elif self.tau is not None:
            raise ConfigError(f"tau is only valid for ssgc, not {self.kind}")
        if self.kind == DGC:
            if self.terminal_time is None:
                raise ConfigError("dgc requires terminal_time")
            if float(self.terminal_time) < 0.0:
                raise ConfigError(f"terminal_time must be >= 0, got {self.terminal_time}")
        elif self.terminal_time is not None:
            raise ConfigError(f"terminal_time is only valid for dgc, not {self.kind}")

    def canonical(self) -> str:
        return f"{self.kind}|{int(self.depth)}|{self.tau!r}|{self.terminal_time!r}|{self.normalization}"

    def cache_digest(self, graph_hash: str) -> bytes:
        payload = f"{self.canonical()}|{graph_hash}".encode()
        return hashlib.sha256(payload).digest()[:16]


@dataclass(frozen=True)
class FilterMatrix:
    """The propagated feature matrix, bound to its config and source graph."""

    values: np.ndarray  # N x F, float64
    config: FilterConfig
    graph_hash: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _checked_step(out: np.ndarray, k: int, depth: int) -> np.ndarray:
    if not np.isfinite(out).all():
        raise NumericalError(f"non-finite filter values after propagation step {k} of {depth}")
    return out


def compute_filter(adj: NormalizedAdjacency, features: np.ndarray, config: FilterConfig) -> FilterMatrix:
    """Propagate ``features`` through the configured filter.

    sgc applies the operator ``depth`` times. ssgc averages the running
    powers and blends the original features back in with weight ``tau``.
    dgc applies the depth-dependent blend (1 - T/K) I + (T/K) A exactly
    ``depth`` times, an Euler discretization of graph diffusion up to
    time T.
    """
    if adj.kind != config.normalization:
        raise ConfigError(
            f"adjacency kind {adj.kind!r} does not match config normalization {config.normalization!r}"
        )
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != adj.num_nodes:
        raise DataError(
            f"features shape {X.shape} does not match adjacency with {adj.num_nodes} nodes"
        )

    A = adj.matrix
    depth = int(config.depth)

    # overflow is detected per step and raised as NumericalError, so the
    # numpy warning would be redundant
    with np.errstate(over="ignore", invalid="ignore"):
        if config.kind == SGC:
            out = X
            for k in range(1, depth + 1):
                out = _checked_step(A @ out, k, depth)
        elif config.kind == SSGC:
            tau = float(config.tau)
            power = X
            acc = np.zeros_like(X)
            for k in range(1, depth + 1):
                power = _checked_step(A @ power, k, depth)
                acc += power
            out = (1.0 - tau) * (acc / depth) + tau * X
        else:  # dgc
            step = float(config.terminal_time) / depth
            out = X
            for k in range(1, depth + 1):
                out = _checked_step((1.0 - step) * out + step * (A @ out), k, depth)

    if out is X:
        out = X.copy()
    return FilterMatrix(out, config, adj.source_graph_hash)


def zero_center(values: FilterMatrix | np.ndarray) -> np.ndarray:
    """Subtract the column mean from every row.

    Accepts either a FilterMatrix or a plain matrix; the result has
    column means of zero (within rounding) and annihilates any matrix
    whose rows are all equal.
    """
    m = values.values if isinstance(values, FilterMatrix) else np.asarray(values, dtype=np.float64)
    return m - m.mean(axis=0, keepdims=True)


def save_filter_cache(fm: FilterMatrix, path: str | Path) -> None:
    """Write a FilterMatrix as little-endian float64 with a 32-byte header."""
    n, f = fm.values.shape
    header = _CACHE_MAGIC + struct.pack("<II", n, f) + fm.config.cache_digest(fm.graph_hash)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(fm.values, dtype="<f8").tobytes())


def load_filter_cache(path: str | Path, config: FilterConfig, graph_hash: str) -> FilterMatrix:
    """Read a cached FilterMatrix, verifying it matches (graph, config)."""
    raw = Path(path).read_bytes()
    if len(raw) < 32 or raw[:8] != _CACHE_MAGIC:
        raise DataError(f"{path}: not a filter cache file")
    n, f = struct.unpack("<II", raw[8:16])
    digest = raw[16:32]
    if digest != config.cache_digest(graph_hash):
        raise DataError(f"{path}: cache was built for a different graph or filter config")
    body = raw[32:]
    if len(body) != n * f * 8:
        raise DataError(f"{path}: truncated cache body ({len(body)} bytes for {n}x{f} matrix)")
    values = np.frombuffer(body, dtype="<f8").reshape(n, f).astype(np.float64)
    return FilterMatrix(values, config, graph_hash)
