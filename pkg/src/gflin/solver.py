"""Closed-form kernel ridge trainer: the gradient-free classifier.

Training never touches a gradient. The dual coefficients solve
``(lam * M + I) L = Y`` where M is the train-set kernel matrix and Y the
encoded labels; prediction is ``lam * m(query, train) @ L``. For the
linear kernel this is algebraically identical to ridge regression on the
raw feature rows with penalty ``xi = 1 / lam`` (the primal form below),
and rescaling the features by beta while rescaling xi by beta**2 leaves
every prediction unchanged.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ConfigError, DataError, NumericalError
from .filters import FilterConfig

LINEAR = "linear"

ONE_HOT = "one_hot"
SIGNED_BINARY = "signed_binary"

DEFAULT_LAMBDA_GRID: tuple[float, ...] = tuple(10.0 ** e for e in range(-4, 5))
DEFAULT_TRAIN_CAP = 20_000

_MODEL_MAGIC = b"GFLNMDL1"
_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Kernel function identifier. Only the linear kernel ships for now."""

    kind: str = LINEAR

    def __post_init__(self) -> None:
        if self.kind != LINEAR:
            raise ConfigError(f"unknown kernel kind {self.kind!r}")


@dataclass(frozen=True)
class KernelModel:
    """Trained artifact of the closed-form fit.

    ``dual_coef`` has one row per training node and one column per class
    (a single signed column for the signed_binary encoding).
    """

    lam: float
    dual_coef: np.ndarray
    train_filter: np.ndarray
    classes: list
    kernel: KernelSpec = field(default_factory=KernelSpec)
    encoding: str = ONE_HOT


def kernel_matrix(rows_a: np.ndarray, rows_b: np.ndarray, spec: KernelSpec | None = None) -> np.ndarray:
    """Pairwise kernel evaluations; entry (u, v) = m(a_u, b_v)."""
    spec = spec or KernelSpec()
    a = np.asarray(rows_a, dtype=np.float64)
    b = np.asarray(rows_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DataError(f"kernel inputs need matching feature dimension, got {a.shape} and {b.shape}")
    return a @ b.T


def encode_labels(labels: Sequence, classes: Sequence, encoding: str) -> np.ndarray:
    """Encode class ids as a target matrix (one-hot, or a signed column)."""
    index = {c: i for i, c in enumerate(classes)}
    ids = np.array([index[y] for y in labels], dtype=np.int64)
    if encoding == ONE_HOT:
        Y = np.zeros((len(ids), len(classes)), dtype=np.float64)
        Y[np.arange(len(ids)), ids] = 1.0
        return Y
    if encoding == SIGNED_BINARY:
        if len(classes) != 2:
            raise ConfigError(f"signed_binary needs exactly 2 classes, got {len(classes)}")
        return np.where(ids == 1, 1.0, -1.0).reshape(-1, 1)
    raise ConfigError(f"unknown label encoding {encoding!r}")


def fit(
    train_filter: np.ndarray,
    labels: Sequence,
    lam: float,
    spec: KernelSpec | None = None,
    *,
    encoding: str = ONE_HOT,
    train_cap: int = DEFAULT_TRAIN_CAP,
) -> KernelModel:
    """Solve (lam * M + I) L = Y and return the trained model.

    The system matrix is symmetric positive definite (its smallest
    eigenvalue is at least 1 for any valid kernel), so it is factorized
    with a Cholesky decomposition; a factorization failure therefore
    signals a broken kernel rather than an ill-posed problem.
    """
    spec = spec or KernelSpec()
    if not lam > 0:
        raise ConfigError(f"lam must be positive, got {lam}")
    F = np.asarray(train_filter, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] < 1:
        raise DataError(f"train_filter must be a non-empty 2-D matrix, got shape {F.shape}")
    n = F.shape[0]
    if n > train_cap:
        raise ConfigError(
            f"{n} training rows exceed the dense-kernel cap of {train_cap}; "
            "raise train_cap explicitly if you have the memory for an NxN kernel"
        )
    if len(labels) != n:
        raise DataError(f"{len(labels)} labels for {n} training rows")

    classes = sorted(set(labels))
    if not classes:
        raise DataError("at least one class is required")
    Y = encode_labels(labels, classes, encoding)

    M = kernel_matrix(F, F, spec)
    system = lam * M + np.eye(n)
    try:
        factor = scipy.linalg.cho_factor(system, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"Cholesky factorization failed (condition estimate {np.linalg.cond(system):.3e}); "
            "the kernel matrix is not positive semidefinite"
        ) from exc
    dual = scipy.linalg.cho_solve(factor, Y)

    residual = np.linalg.norm(system @ dual - Y) / np.linalg.norm(Y)
    if residual > _RESIDUAL_TOL:
        raise NumericalError(f"dual solve residual {residual:.3e} exceeds {_RESIDUAL_TOL}")

    return KernelModel(float(lam), dual, F.copy(), list(classes), spec, encoding)


def predict(model: KernelModel, query_filter: np.ndarray) -> tuple[np.ndarray, list]:
    """Score query rows and decode labels.

    Scores are ``lam * m(query, train) @ dual_coef``. For one-hot models
    the label is the argmax over columns with ties broken toward the
    lowest class index; for signed_binary the sign decides (zero maps to
    the lower class).
    """
    Q = np.asarray(query_filter, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] != model.train_filter.shape[1]:
        raise DataError(
            f"query shape {Q.shape} does not match training feature dimension "
            f"{model.train_filter.shape[1]}"
        )
    scores = model.lam * (kernel_matrix(Q, model.train_filter, model.kernel) @ model.dual_coef)
    if model.encoding == SIGNED_BINARY:
        labels = [model.classes[1] if s > 0 else model.classes[0] for s in scores[:, 0]]
    else:
        labels = [model.classes[i] for i in np.argmax(scores, axis=1)]
    return scores, labels


def fit_primal_linear(train_filter: np.ndarray, labels: Sequence, xi: float, *, encoding: str = ONE_HOT) -> np.ndarray:
    """Ridge solution in weight space: W = (F^T F + xi I)^-1 F^T Y."""
    if not xi > 0:
        raise ConfigError(f"xi must be positive, got {xi}")
    F = np.asarray(train_filter, dtype=np.float64)
    classes = sorted(set(labels))
    Y = encode_labels(labels, classes, encoding)
    gram = F.T @ F + xi * np.eye(F.shape[1])
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"Cholesky factorization failed (condition estimate {np.linalg.cond(gram):.3e})"
        ) from exc
    return scipy.linalg.cho_solve(factor, F.T @ Y)


def check_scale_invariance(train_filter: np.ndarray, labels: Sequence, xi: float, beta: float) -> float:
    """Max abs train-set prediction change under (beta * F, beta**2 * xi).

    Returns exactly 0.0 for beta = 1 and stays at rounding level for any
    other nonzero beta: the linear-kernel estimator is invariant to a
    global feature rescaling once the ridge penalty is rescaled by the
    squared factor.
    """
    if beta == 0:
        raise ConfigError("beta must be nonzero")
    F = np.asarray(train_filter, dtype=np.float64)
    base = predict(fit(F, labels, 1.0 / xi), F)[0]
    scaled = predict(fit(beta * F, labels, 1.0 / (beta * beta * xi)), beta * F)[0]
    return float(np.max(np.abs(base - scaled))) if base.size else 0.0


def select_lambda(
    train_filter: np.ndarray,
    train_labels: Sequence,
    val_filter: np.ndarray,
    val_labels: Sequence,
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    spec: KernelSpec | None = None,
    *,
    encoding: str = ONE_HOT,
) -> tuple[float, float, list[tuple[float, float]]]:
    """Pick lam from ``grid`` by validation accuracy.

    Returns (best_lam, best_accuracy, per-lam accuracies). Ties keep the
    earliest grid entry, so results are deterministic.
    """
    if not len(grid):
        raise ConfigError("lambda grid must not be empty")
    val_labels = list(val_labels)
    scores: list[tuple[float, float]] = []
    best_lam, best_acc = None, -1.0
    for lam in grid:
        model = fit(train_filter, train_labels, lam, spec, encoding=encoding)
        _, pred = predict(model, val_filter)
        acc = float(np.mean([p == t for p, t in zip(pred, val_labels)])) if val_labels else 0.0
        scores.append((float(lam), acc))
        if acc > best_acc:
            best_lam, best_acc = float(lam), acc
    return best_lam, best_acc, scores


def _class_to_json(c):
    return int(c) if isinstance(c, (int, np.integer)) else str(c)


def save_model(
    model: KernelModel,
    path: str | Path,
    train_labels: Sequence,
    filter_config: FilterConfig | None = None,
) -> None:
    """Persist a model as one self-describing binary file.

    Layout: 8-byte magic, little-endian uint64 header length, a JSON
    header (format version, filter config, kernel, lam, classes,
    encoding, labels, shapes), then the dual coefficients and training
    rows as little-endian float64 in row-major order.
    """
    labels = [_class_to_json(y) for y in train_labels]
    if len(labels) != model.dual_coef.shape[0]:
        raise DataError(
            f"{len(labels)} train labels for {model.dual_coef.shape[0]} dual coefficient rows"
        )
    header = {
        "format": 1,
        "lambda": model.lam,
        "kernel": model.kernel.kind,
        "encoding": model.encoding,
        "classes": [_class_to_json(c) for c in model.classes],
        "train_labels": labels,
        "dual_shape": list(model.dual_coef.shape),
        "train_shape": list(model.train_filter.shape),
        "filter": None
        if filter_config is None
        else {
            "kind": filter_config.kind,
            "depth": int(filter_config.depth),
            "tau": filter_config.tau,
            "terminal_time": filter_config.terminal_time,
            "normalization": filter_config.normalization,
        },
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(model.dual_coef, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.train_filter, dtype="<f8").tobytes())


def load_model(path: str | Path) -> tuple[KernelModel, FilterConfig | None]:
    """Load a persisted model, re-verifying the defining-equation residual."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != _MODEL_MAGIC:
        raise DataError(f"{path}: not a model file")
    (header_len,) = struct.unpack("<Q", raw[8:16])
    try:
        header = json.loads(raw[16:16 + header_len])
    except (ValueError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: corrupt model header") from exc
    if header.get("format") != 1:
        raise DataError(f"{path}: unsupported model format {header.get('format')!r}")

    dn, dc = header["dual_shape"]
    tn, tf = header["train_shape"]
    offset = 16 + header_len
    dual_bytes = dn * dc * 8
    train_bytes = tn * tf * 8
    if len(raw) != offset + dual_bytes + train_bytes:
        raise DataError(f"{path}: truncated model body")
    dual = np.frombuffer(raw[offset:offset + dual_bytes], dtype="<f8").reshape(dn, dc).astype(np.float64)
    train = np.frombuffer(raw[offset + dual_bytes:], dtype="<f8").reshape(tn, tf).astype(np.float64)

    spec = KernelSpec(header["kernel"])
    model = KernelModel(float(header["lambda"]), dual, train, list(header["classes"]), spec, header["encoding"])

    Y = encode_labels(header["train_labels"], model.classes, model.encoding)
    system = model.lam * kernel_matrix(train, train, spec) + np.eye(tn)
    residual = np.linalg.norm(system @ dual - Y) / np.linalg.norm(Y)
    if residual > _RESIDUAL_TOL:
        raise DataError(f"{path}: stored model violates its defining equation (residual {residual:.3e})")

    fc = header.get("filter")
    filter_config = (
        None
        if fc is None
        else FilterConfig(fc["kind"], fc["depth"], fc["tau"], fc["terminal_time"], fc["normalization"])
    )
    return model, filter_config
