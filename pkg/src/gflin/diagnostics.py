"""Depth-limit diagnostics for the linear filters.

As depth grows, the zero-centered output of the plain power filter on a
connected non-bipartite graph collapses toward zero under the
row-stochastic operator; the averaged filter settles at tau times the
centered features, and the diffusion filter at the centered matrix
exponential of T * (A_rw - I) applied to the features. These helpers
measure the decay curves and the residuals against those analytic
targets.

The exact limits hold for the raw row-normalized adjacency, so the
functions here default to ``self_loops=False``; runs on the self-loop
or symmetric operators are qualitative.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .filters import DGC, SGC, SSGC, FilterConfig, compute_filter, zero_center
from .graph import ROW, Graph, is_connected_non_bipartite, normalize

EXPM_MAX_NODES = 200


@dataclass(frozen=True)
class LimitReport:
    """Per-depth centered norms and residuals against the analytic limit."""

    filter_kind: str
    k_values: list[int]
    centered_norms: list[float]
    limit_target: np.ndarray  # N x F; the zero matrix for the power filter
    residuals: list[float]
    graph_preconditions: tuple[bool, bool]  # (connected, bipartite)

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.k_values, self.k_values[1:])):
            raise ConfigError(f"k_values must be strictly increasing, got {self.k_values}")
        if not all(np.isfinite(self.residuals)):
            raise NumericalError("limit residuals contain non-finite values")


def matrix_exponential(m: np.ndarray, tol: float = 1e-12, max_terms: int = 80) -> np.ndarray:
    """Dense matrix exponential by scaling-and-squaring with a Taylor tail.

    The input is scaled by a power of two until its 1-norm is at most 1,
    the series is summed until the term 1-norm drops below ``tol``
    relative to the partial sum, and the result is squared back up.
    Intended for diagnostics-scale matrices only (N <= 200).
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(f"matrix exponential needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > EXPM_MAX_NODES:
        raise ConfigError(f"matrix exponential is limited to {EXPM_MAX_NODES} nodes, got {n}")

    norm = np.linalg.norm(a, 1)
    squarings = max(0, int(np.ceil(np.log2(norm)))) if norm > 1.0 else 0
    a = a / (2.0 ** squarings)

    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, max_terms + 1):
        term = term @ a / k
        result = result + term
        if np.linalg.norm(term, 1) <= tol * max(1.0, np.linalg.norm(result, 1)):
            break
    else:
        raise NumericalError(f"matrix exponential series did not converge in {max_terms} terms")

    for _ in range(squarings):
        result = result @ result
    return result


def _config_for(kind: str, depth: int, tau: float | None, terminal_time: float | None, normalization: str) -> FilterConfig:
    if kind == SSGC:
        return FilterConfig(kind, depth, tau=tau, normalization=normalization)
    if kind == DGC:
        return FilterConfig(kind, depth, terminal_time=terminal_time, normalization=normalization)
    return FilterConfig(kind, depth, normalization=normalization)


def centered_norm_curve(
    graph: Graph,
    features: np.ndarray,
    kind: str,
    k_values: Sequence[int],
    *,
    tau: float | None = None,
    terminal_time: float | None = None,
    normalization: str = ROW,
    self_loops: bool = False,
) -> list[tuple[int, float]]:
    """Frobenius norm of the zero-centered filter output at each depth."""
    adj = normalize(graph, normalization, self_loops=self_loops)
    X = np.asarray(features, dtype=np.float64)
    curve = []
    for k in k_values:
        fm = compute_filter(adj, X, _config_for(kind, int(k), tau, terminal_time, normalization))
        curve.append((int(k), float(np.linalg.norm(zero_center(fm)))))
    return curve


def ssgc_limit_residual(
    graph: Graph,
    features: np.ndarray,
    tau: float,
    depth: int,
    *,
    self_loops: bool = False,
) -> float:
    """Distance of the centered averaged-filter output to tau * centered features."""
    adj = normalize(graph, ROW, self_loops=self_loops)
    X = np.asarray(features, dtype=np.float64)
    fm = compute_filter(adj, X, FilterConfig(SSGC, int(depth), tau=tau, normalization=ROW))
    return float(np.linalg.norm(zero_center(fm) - tau * zero_center(X)))


def dgc_limit_target(
    graph: Graph,
    features: np.ndarray,
    terminal_time: float,
    *,
    self_loops: bool = False,
) -> np.ndarray:
    """Centered diffusion limit: (I - 11^T/N) expm(T (A_rw - I)) X."""
    adj = normalize(graph, ROW, self_loops=self_loops)
    X = np.asarray(features, dtype=np.float64)
    operator = adj.matrix.toarray() - np.eye(graph.num_nodes)
    return zero_center(matrix_exponential(terminal_time * operator) @ X)


def dgc_limit_residual(
    graph: Graph,
    features: np.ndarray,
    terminal_time: float,
    depth: int,
    *,
    self_loops: bool = False,
) -> float:
    """Distance of the centered diffusion-filter output to its exponential limit."""
    adj = normalize(graph, ROW, self_loops=self_loops)
    X = np.asarray(features, dtype=np.float64)
    fm = compute_filter(adj, X, FilterConfig(DGC, int(depth), terminal_time=terminal_time, normalization=ROW))
    target = dgc_limit_target(graph, X, terminal_time, self_loops=self_loops)
    return float(np.linalg.norm(zero_center(fm) - target))


def vanishing_verdict(curve: Sequence[tuple[int, float]], threshold_ratio: float = 1e-2) -> bool:
    """True iff the centered norm at the deepest K fell below
    ``threshold_ratio`` times the norm at the shallowest K."""
    if len(curve) < 2:
        raise ConfigError(f"need at least 2 curve points, got {len(curve)}")
    first = min(curve, key=lambda p: p[0])
    last = max(curve, key=lambda p: p[0])
    return last[1] < threshold_ratio * first[1]


def build_limit_report(
    graph: Graph,
    features: np.ndarray,
    kind: str,
    k_values: Sequence[int],
    *,
    tau: float | None = None,
    terminal_time: float | None = None,
    self_loops: bool = False,
) -> LimitReport:
    """Run the depth sweep for one filter and collect norms plus residuals.

    Residuals measure the Frobenius distance to the analytic limit: the
    zero matrix for sgc, tau * centered features for ssgc, and the
    centered matrix-exponential image for dgc.
    """
    X = np.asarray(features, dtype=np.float64)
    ks = [int(k) for k in k_values]
    curve = centered_norm_curve(
        graph, X, kind, ks, tau=tau, terminal_time=terminal_time, self_loops=self_loops
    )
    norms = [norm for _, norm in curve]

    if kind == SGC:
        target = np.zeros_like(X)
        residuals = list(norms)
    elif kind == SSGC:
        if tau is None:
            raise ConfigError("ssgc limit report requires tau")
        target = tau * zero_center(X)
        residuals = [ssgc_limit_residual(graph, X, tau, k, self_loops=self_loops) for k in ks]
    elif kind == DGC:
        if terminal_time is None:
            raise ConfigError("dgc limit report requires terminal_time")
        target = dgc_limit_target(graph, X, terminal_time, self_loops=self_loops)
        residuals = [
            dgc_limit_residual(graph, X, terminal_time, k, self_loops=self_loops) for k in ks
        ]
    else:
        raise ConfigError(f"unknown filter kind {kind!r}")

    return LimitReport(kind, ks, norms, target, residuals, is_connected_non_bipartite(graph))


def report_to_json(report: LimitReport, threshold_ratio: float = 1e-2) -> str:
    connected, bipartite = report.graph_preconditions
    payload = {
        "filter_kind": report.filter_kind,
        "k_values": report.k_values,
        "centered_norms": report.centered_norms,
        "residuals": report.residuals,
        "limit_target": report.limit_target.tolist(),
        "graph_preconditions": {"connected": connected, "bipartite": bipartite},
        "vanishing_verdict": vanishing_verdict(
            list(zip(report.k_values, report.centered_norms)), threshold_ratio
        ),
        "threshold_ratio": threshold_ratio,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def report_to_csv(report: LimitReport, path: str | Path | None = None) -> str:
    """Write (or return) the per-depth rows as ``K,norm,residual``."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["K", "norm", "residual"])
    for k, norm, res in zip(report.k_values, report.centered_norms, report.residuals):
        writer.writerow([k, repr(norm), repr(res)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
