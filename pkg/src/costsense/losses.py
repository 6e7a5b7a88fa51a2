"""Cost-sensitive training losses and their exact gradients.

Each loss sees the network's output activations ``o`` only after the
true class's cost row has reshaped them. With row ``xi = costs[p]`` for
a sample of true class p and one-hot target ``d``:

* mse:   y_n = sigmoid(o_n * xi_n),           loss = 0.5 * sum (d_n - y_n)^2
* hinge: y_n = o_n * xi_n,                    loss = sum max(0, 1 - (2 d_n - 1) y_n)
* ce:    y_n = xi_n e^{o_n} / sum_k xi_k e^{o_k},  loss = -sum d_n log y_n

The cross-entropy gradient with respect to ``o`` is exactly ``y - d``,
the same algebraic form as the standard softmax loss; the cost matrix
moves entirely into the squashing stage. The plain (cost-insensitive)
counterparts live here too as an independent reference path: they never
touch a cost matrix, and with an all-ones matrix both paths coincide
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cost_matrix import CostMatrix, validate_posterior
from .errors import (
    ConvergenceError,
    NumericError,
    PreconditionError,
    RangeViolation,
    ShapeError,
)

# Floor inside log() so saturated softmax outputs cannot emit -inf.
LOG_EPS = 1e-12


class LossKind(Enum):
    MSE = "mse"
    HINGE = "hinge"
    CROSS_ENTROPY = "ce"


@dataclass(frozen=True)
class LossEvaluation:
    """Loss value, squashed outputs and gradient w.r.t. the activations.

    ``floored`` flags that the cross-entropy log was clamped at LOG_EPS.
    """

    value: float
    squashed_outputs: np.ndarray
    gradient_wrt_o: np.ndarray
    floored: bool = False


def one_hot(true_class: int, n_classes: int) -> np.ndarray:
    if not 0 <= true_class < n_classes:
        raise ShapeError(f"class {true_class} out of range for {n_classes} classes")
    d = np.zeros(n_classes)
    d[true_class] = 1.0
    return d


def validate_target(target) -> np.ndarray:
    """Check one-hotness; returns the float64 vector."""
    d = np.asarray(target, dtype=np.float64)
    if d.ndim != 1:
        raise ShapeError(f"target must be a vector, got shape {d.shape}")
    ones = np.flatnonzero(d == 1.0)
    if ones.size != 1 or np.any((d != 0.0) & (d != 1.0)):
        raise RangeViolation("target must be one-hot")
    return d


def true_class_of(target) -> int:
    return int(np.flatnonzero(validate_target(target) == 1.0)[0])


def _check_pair(costs: CostMatrix, true_class: int, o: np.ndarray):
    if o.ndim != 1 or o.size != costs.n_classes:
        raise ShapeError(
            f"activations have shape {o.shape}, expected ({costs.n_classes},)"
        )
    if not 0 <= true_class < costs.n_classes:
        raise ShapeError(f"true class {true_class} out of range")
    if not np.all(np.isfinite(o)):
        raise NumericError("activations contain non-finite values")


def cost_softmax(costs: CostMatrix, true_class: int, activations) -> np.ndarray:
    """Cost-reshaped softmax y_n = xi_n e^{o_n} / sum_k xi_k e^{o_k}.

    Shift-invariant in ``o`` and invariant to scaling the cost row by a
    positive constant. Computed with the usual max-shift so activations
    anywhere in [-745, 745] stay finite.
    """
    o = np.asarray(activations, dtype=np.float64)
    _check_pair(costs, true_class, o)
    row = costs.entries[true_class]
    w = row * np.exp(o - o.max())
    return w / w.sum()


def standard_softmax(activations) -> np.ndarray:
    o = np.asarray(activations, dtype=np.float64)
    e = np.exp(o - o.max())
    return e / e.sum()


def _evaluate(kind: LossKind, row: np.ndarray, d: np.ndarray, o: np.ndarray):
    """Shared per-sample kernel; returns (value, y, grad, floored)."""
    if kind is LossKind.MSE:
        y = 1.0 / (1.0 + np.exp(-o * row))
        value = 0.5 * np.sum((d - y) ** 2)
        grad = -row * (d - y) * y * (1.0 - y)
        return float(value), y, grad, False
    if kind is LossKind.HINGE:
        y = o * row
        sign = 2.0 * d - 1.0
        margins = 1.0 - sign * y
        value = np.sum(np.maximum(0.0, margins))
        # Subgradient 0 exactly at the kink.
        grad = -sign * row * (margins > 0.0)
        return float(value), y, grad, False
    if kind is LossKind.CROSS_ENTROPY:
        w = row * np.exp(o - o.max())
        y = w / w.sum()
        floored = bool(y[d == 1.0] < LOG_EPS)
        value = -np.sum(d * np.log(np.maximum(y, LOG_EPS)))
        grad = y - d
        return float(value), y, grad, floored
    raise ValueError(f"unknown loss kind {kind!r}")


def forward(kind: LossKind, costs: CostMatrix, target, activations) -> LossEvaluation:
    """Evaluate one sample; the target's class picks the cost row."""
    d = validate_target(target)
    o = np.asarray(activations, dtype=np.float64)
    p = int(np.flatnonzero(d == 1.0)[0])
    _check_pair(costs, p, o)
    if d.size != costs.n_classes:
        raise ShapeError("target length does not match the cost matrix")
    value, y, grad, floored = _evaluate(kind, costs.entries[p], d, o)
    return LossEvaluation(value, y, grad, floored)


def backward(kind: LossKind, costs: CostMatrix, target, activations) -> np.ndarray:
    """Gradient of the loss w.r.t. the activations ``o``."""
    return forward(kind, costs, target, activations).gradient_wrt_o


def standard_forward(kind: LossKind, target, activations) -> LossEvaluation:
    """Cost-insensitive reference loss (no cost matrix anywhere)."""
    d = validate_target(target)
    o = np.asarray(activations, dtype=np.float64)
    if o.shape != d.shape:
        raise ShapeError("target and activations disagree in shape")
    if kind is LossKind.MSE:
        y = 1.0 / (1.0 + np.exp(-o))
        return LossEvaluation(
            float(0.5 * np.sum((d - y) ** 2)), y, -(d - y) * y * (1.0 - y)
        )
    if kind is LossKind.HINGE:
        sign = 2.0 * d - 1.0
        margins = 1.0 - sign * o
        return LossEvaluation(
            float(np.sum(np.maximum(0.0, margins))), o.copy(), -sign * (margins > 0.0)
        )
    y = standard_softmax(o)
    floored = bool(y[d == 1.0] < LOG_EPS)
    value = -np.sum(d * np.log(np.maximum(y, LOG_EPS)))
    return LossEvaluation(float(value), y, y - d, floored)


def standard_backward(kind: LossKind, target, activations) -> np.ndarray:
    return standard_forward(kind, target, activations).gradient_wrt_o


# ---------------------------------------------------------------------------
# Batched variants used by the trainers. Same formulas, one row per sample;
# the cost path with an all-ones matrix reproduces the plain path bit for
# bit because multiplying by 1.0 is exact.


def forward_batch(kind: LossKind, cost_entries: np.ndarray, labels: np.ndarray,
                  outputs: np.ndarray):
    """Per-sample losses and gradients for a batch; returns (values, grads)."""
    xi = cost_entries[labels]  # one cost row per sample
    d = np.zeros_like(outputs)
    d[np.arange(labels.size), labels] = 1.0
    if kind is LossKind.MSE:
        y = 1.0 / (1.0 + np.exp(-outputs * xi))
        values = 0.5 * np.sum((d - y) ** 2, axis=1)
        grads = -xi * (d - y) * y * (1.0 - y)
        return values, grads
    if kind is LossKind.HINGE:
        y = outputs * xi
        sign = 2.0 * d - 1.0
        margins = 1.0 - sign * y
        values = np.sum(np.maximum(0.0, margins), axis=1)
        grads = -sign * xi * (margins > 0.0)
        return values, grads
    m = outputs.max(axis=1, keepdims=True)
    w = xi * np.exp(outputs - m)
    y = w / w.sum(axis=1, keepdims=True)
    picked = y[np.arange(labels.size), labels]
    values = -np.log(np.maximum(picked, LOG_EPS))
    grads = y - d
    return values, grads


def standard_forward_batch(kind: LossKind, labels: np.ndarray, outputs: np.ndarray):
    d = np.zeros_like(outputs)
    d[np.arange(labels.size), labels] = 1.0
    if kind is LossKind.MSE:
        y = 1.0 / (1.0 + np.exp(-outputs))
        return 0.5 * np.sum((d - y) ** 2, axis=1), -(d - y) * y * (1.0 - y)
    if kind is LossKind.HINGE:
        sign = 2.0 * d - 1.0
        margins = 1.0 - sign * outputs
        return np.sum(np.maximum(0.0, margins), axis=1), -sign * (margins > 0.0)
    m = outputs.max(axis=1, keepdims=True)
    e = np.exp(outputs - m)
    y = e / e.sum(axis=1, keepdims=True)
    picked = y[np.arange(labels.size), labels]
    return -np.log(np.maximum(picked, LOG_EPS)), y - d


# ---------------------------------------------------------------------------
# Analytic properties of the cross-entropy loss.


def check_guess_aversion(costs: CostMatrix, target, activations) -> bool:
    """Is the cross-entropy at ``o`` below the uniform-guess point o = 0?

    Requires the true-class activation to strictly dominate every other,
    otherwise raises PreconditionError.
    """
    d = validate_target(target)
    o = np.asarray(activations, dtype=np.float64)
    p = int(np.flatnonzero(d == 1.0)[0])
    _check_pair(costs, p, o)
    others = np.delete(o, p)
    if others.size and o[p] <= others.max():
        raise PreconditionError(
            "guess aversion requires the true class activation to strictly "
            "dominate all others"
        )
    at_o = forward(LossKind.CROSS_ENTROPY, costs, d, o).value
    at_zero = forward(LossKind.CROSS_ENTROPY, costs, d, np.zeros_like(o)).value
    return at_o < at_zero


def expected_ce_risk(costs: CostMatrix, posterior, activations) -> float:
    """Posterior-weighted cross-entropy risk sum_p P(p) * ce(p, o)."""
    p = validate_posterior(posterior)
    o = np.asarray(activations, dtype=np.float64)
    xi = costs.entries
    if p.size != xi.shape[0] or o.size != xi.shape[0]:
        raise ShapeError("posterior, costs and activations disagree in size")
    shifted = np.exp(o - o.max())
    y_true = (np.diag(xi) * shifted) / (xi @ shifted)
    return float(-np.sum(p * np.log(np.maximum(y_true, LOG_EPS))))


def ce_risk_gradient(costs: CostMatrix, posterior, activations) -> np.ndarray:
    """Gradient of :func:`expected_ce_risk` with respect to the activations."""
    p = validate_posterior(posterior)
    xi = costs.entries
    o = np.asarray(activations, dtype=np.float64)
    shifted = np.exp(o - o.max())
    z = xi @ shifted  # shifted row partition sums
    return -p + shifted * ((p / z) @ xi)


def calibration_stationary_output(
    costs: CostMatrix,
    posterior,
    *,
    damping: float = 0.5,
    max_iter: int = 10_000,
    tol: float = 1e-8,
) -> np.ndarray:
    """Activations at which the posterior-weighted cross-entropy risk is stationary.

    Solves grad_o sum_p P(p) ce(p, o) = 0 by damped fixed-point iteration

        o_t <- log P(t) - log sum_p P(p) xi[p, t] / Z_p(o),
        Z_p(o) = sum_k xi[p, k] e^{o_k},

    normalized to sum(o) = 0 (the risk is shift-invariant). At the
    solution the post-hoc softmax of ``o`` recovers a reweighting of the
    posterior; with an all-ones matrix argmax o equals argmax P. Raises
    ConvergenceError if the risk-gradient max-norm does not drop below
    ``tol`` within ``max_iter`` sweeps, PreconditionError when the
    posterior has zero entries (those classes want o -> -inf).
    """
    p = validate_posterior(posterior)
    xi = costs.entries
    if p.size != xi.shape[0]:
        raise ShapeError("posterior and cost matrix disagree in size")
    if p.size < 2:
        raise ShapeError("calibration needs at least two classes")
    if np.any(p <= 0):
        raise PreconditionError("calibration requires a strictly positive posterior")
    if not 0 < damping <= 1:
        raise RangeViolation("damping must lie in (0, 1]")

    log_p = np.log(p)
    o = np.zeros_like(p)
    residual = np.inf
    for _ in range(max_iter):
        shifted = np.exp(o - o.max())
        z = xi @ shifted
        weighted = (p / z) @ xi  # shifted form of sum_p P(p) xi[p, t] / Z_p
        grad = -p + shifted * weighted
        residual = float(np.max(np.abs(grad)))
        if residual < tol:
            # o is zero-mean already: it starts at zero and every update
            # below re-centers it.
            return o
        # Fixed point o_t = log P(t) - log(weighted_t) up to a constant,
        # which the zero-mean normalization absorbs.
        target = log_p - np.log(weighted)
        o = (1.0 - damping) * o + damping * target
        o = o - o.mean()
    raise ConvergenceError(
        f"calibration residual {residual:.3e} after {max_iter} iterations",
        residual=residual,
    )
