"""Gradient-descent baseline: multinomial logistic regression on filter rows.

This is the conventional training arm used for ablations, plus the
step-0 gradient capture that makes shrinking gradients measurable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .solver import encode_labels

ADAM_LIKE = "adam_like"
PLAIN_GD = "plain_gd"


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    method: str = ADAM_LIKE
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.method not in (ADAM_LIKE, PLAIN_GD):
            raise ConfigError(f"unknown optimizer method {self.method!r}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass(frozen=True)
class LogRegModel:
    weights: np.ndarray  # F x C
    bias: np.ndarray  # 1 x C
    training_trace: list[tuple[int, float]]
    initial_gradient: np.ndarray  # F x C snapshot before the first update
    classes: list


def nll_loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    filter_rows: np.ndarray,
    one_hot_labels: np.ndarray,
    weight_decay: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean negative log-likelihood of softmax(F W + b) and its gradients.

    The weight gradient is F^T (softmax(H) - Y) / n plus the decay term;
    the bias gradient is the column sum of (softmax(H) - Y) / n. The
    decay does not touch the bias.
    """
    F = np.asarray(filter_rows, dtype=np.float64)
    Y = np.asarray(one_hot_labels, dtype=np.float64)
    H = F @ weights + bias
    if not np.isfinite(H).all():
        raise NumericalError(f"non-finite logits (max |H| = {np.nanmax(np.abs(H)):.3e})")
    shifted = H - H.max(axis=1, keepdims=True)
    expH = np.exp(shifted)
    Z = expH.sum(axis=1, keepdims=True)
    P = expH / Z
    n = F.shape[0]
    loss = float(np.mean(np.log(Z).ravel() - np.sum(Y * shifted, axis=1)))
    if not np.isfinite(loss):
        raise NumericalError(f"non-finite loss (max |H| = {np.abs(H).max():.3e})")
    G = (P - Y) / n
    grad_w = F.T @ G + weight_decay * weights
    grad_b = G.sum(axis=0, keepdims=True)
    return loss, grad_w, grad_b


def mse_loss_and_grad(
    weights: np.ndarray,
    filter_rows: np.ndarray,
    one_hot_labels: np.ndarray,
    ridge: float,
) -> tuple[float, np.ndarray]:
    """Summed squared error plus L2 penalty; the objective the closed form solves."""
    F = np.asarray(filter_rows, dtype=np.float64)
    Y = np.asarray(one_hot_labels, dtype=np.float64)
    R = F @ weights - Y
    loss = 0.5 * float(np.sum(R * R)) + 0.5 * ridge * float(np.sum(weights * weights))
    grad = F.T @ R + ridge * weights
    return loss, grad


def train(filter_rows: np.ndarray, labels: Sequence, config: OptimizerConfig) -> LogRegModel:
    """Full-batch training, deterministic given the config seed.

    Weights start uniform in [-s, s] with s = 1 / sqrt(F); the bias
    starts at zero. The gradient snapshot is taken before the first
    update and the loss trace records one entry per epoch (pre-update).
    """
    F = np.asarray(filter_rows, dtype=np.float64)
    classes = sorted(set(labels))
    Y = encode_labels(labels, classes, "one_hot")
    num_feat, num_classes = F.shape[1], len(classes)

    rng = np.random.default_rng(config.seed)
    scale = 1.0 / np.sqrt(max(num_feat, 1))
    W = rng.uniform(-scale, scale, size=(num_feat, num_classes))
    b = np.zeros((1, num_classes))

    m_w = np.zeros_like(W)
    v_w = np.zeros_like(W)
    m_b = np.zeros_like(b)
    v_b = np.zeros_like(b)

    trace: list[tuple[int, float]] = []
    initial_gradient = np.zeros_like(W)
    lr = config.learning_rate

    for epoch in range(config.epochs):
        try:
            loss, g_w, g_b = nll_loss_and_grad(W, b, F, Y, config.weight_decay)
        except NumericalError as exc:
            raise NumericalError(f"training diverged at epoch {epoch}: {exc}") from exc
        if epoch == 0:
            initial_gradient = g_w.copy()
        trace.append((epoch, loss))

        if config.method == ADAM_LIKE:
            t = epoch + 1
            m_w = config.beta1 * m_w + (1 - config.beta1) * g_w
            v_w = config.beta2 * v_w + (1 - config.beta2) * g_w * g_w
            m_b = config.beta1 * m_b + (1 - config.beta1) * g_b
            v_b = config.beta2 * v_b + (1 - config.beta2) * g_b * g_b
            corr1 = 1 - config.beta1 ** t
            corr2 = 1 - config.beta2 ** t
            W = W - lr * (m_w / corr1) / (np.sqrt(v_w / corr2) + config.eps)
            b = b - lr * (m_b / corr1) / (np.sqrt(v_b / corr2) + config.eps)
        else:
            W = W - lr * g_w
            b = b - lr * g_b

    return LogRegModel(W, b, trace, initial_gradient, list(classes))


def predict_labels(model: LogRegModel, filter_rows: np.ndarray) -> list:
    """Argmax class per row; ties go to the lowest class index."""
    H = np.asarray(filter_rows, dtype=np.float64) @ model.weights + model.bias
    return [model.classes[i] for i in np.argmax(H, axis=1)]


def gradient_stats(model: LogRegModel) -> dict[str, float]:
    """Distribution summary of |dL/dW| entries at step 0."""
    mags = np.abs(model.initial_gradient).ravel()
    return {
        "median_abs": float(np.median(mags)),
        "p05": float(np.percentile(mags, 5)),
        "p95": float(np.percentile(mags, 95)),
        "max_abs": float(np.max(mags)),
    }


def write_trace_csv(model: LogRegModel, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in model.training_trace:
            writer.writerow([epoch, repr(loss)])


def write_gradient_csv(model: LogRegModel, path: str | Path) -> None:
    """Flattened step-0 gradient values, one per row, for density plots."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value"])
        for v in model.initial_gradient.ravel():
            writer.writerow([repr(float(v))])
