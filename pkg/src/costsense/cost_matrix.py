"""Cost matrices for cost-sensitive classification.

Two distinct formalisms live here:

* :class:`TraditionalCostMatrix` holds additive decision costs. Entry
  (p, q) is the cost of predicting class p when the true class is q, and
  it enters the expected risk R(p | x) = sum_q cost[p, q] * P(q | x).
  Adding one constant to every entry never changes the risk-minimizing
  decision, so these matrices are only defined up to a column offset.

* :class:`CostMatrix` holds multiplicative score-level costs in (0, 1].
  Row p scales the output activations of a sample whose true class is p
  (a Hadamard product), which reshapes the loss rather than the decision
  rule. The all-ones matrix is exactly cost-insensitive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NumericError,
    PositivityViolation,
    RangeViolation,
    ShapeError,
    UtilityBoundError,
)

# Absolute slack when checking the diagonal-vs-column-mean bound.
BOUND_TOL = 1e-12


def _as_square(entries, name: str) -> np.ndarray:
    arr = np.array(entries, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ShapeError(f"{name} needs at least one class")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class TraditionalCostMatrix:
    """Additive cost matrix; rows = predicted class, columns = true class."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_square(self.entries, "cost matrix")
        if np.any(arr < 0):
            raise PositivityViolation("additive costs must be non-negative")
        # Correct classification may not cost more than the column average,
        # otherwise never predicting that class would dominate.
        diag = np.diag(arr)
        col_mean = arr.mean(axis=0)
        if np.any(diag > col_mean + BOUND_TOL):
            bad = int(np.argmax(diag - col_mean))
            raise UtilityBoundError(
                f"diagonal cost {diag[bad]} of class {bad} exceeds its "
                f"column mean {col_mean[bad]}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def n_classes(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class CostMatrix:
    """Score-level cost matrix; entries in (0, 1], row p scales true-class-p scores."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_square(self.entries, "score cost matrix")
        if np.any(arr <= 0):
            raise PositivityViolation("score costs must be strictly positive")
        if np.any(arr > 1.0):
            raise RangeViolation("score costs must not exceed 1")
        # The diagonal feeds log terms downstream; assert it independently.
        if np.any(np.diag(arr) <= 0):
            raise PositivityViolation("diagonal score costs must be strictly positive")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def n_classes(self) -> int:
        return self.entries.shape[0]

    @property
    def is_cost_insensitive(self) -> bool:
        """True when every entry equals 1, i.e. costs change nothing."""
        return bool(np.all(self.entries == 1.0))


def all_ones_costs(n_classes: int) -> CostMatrix:
    """The cost-insensitive score cost matrix."""
    return CostMatrix(np.ones((n_classes, n_classes)))


def validate_cost_matrix(entries) -> CostMatrix:
    """Validate raw entries into a :class:`CostMatrix`.

    Raises PositivityViolation for entries <= 0, RangeViolation for
    entries > 1 and ShapeError for non-square input.
    """
    return CostMatrix(entries)


def validate_posterior(posterior) -> np.ndarray:
    """Check that ``posterior`` is a probability vector; returns float64 copy."""
    p = np.array(posterior, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise ShapeError(f"posterior must be a vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise NumericError("posterior contains non-finite entries")
    if np.any(p < 0) or np.any(p > 1):
        raise RangeViolation("posterior entries must lie in [0, 1]")
    if abs(p.sum() - 1.0) > 1e-9:
        raise RangeViolation(f"posterior sums to {p.sum()!r}, expected 1")
    return p


def _entries_of(costs) -> np.ndarray:
    # Accept either a validated matrix object or a raw ndarray; raw input
    # supports analysis of degenerate matrices (e.g. offset-to-zero).
    if isinstance(costs, (TraditionalCostMatrix, CostMatrix)):
        return costs.entries
    return np.asarray(costs, dtype=np.float64)


def expected_risk(costs: TraditionalCostMatrix, posterior, predicted_class: int) -> float:
    """Expected cost of predicting ``predicted_class`` under ``posterior``."""
    p = validate_posterior(posterior)
    arr = costs.entries
    if p.size != arr.shape[0]:
        raise ShapeError(
            f"posterior has {p.size} classes, cost matrix has {arr.shape[0]}"
        )
    if not 0 <= predicted_class < arr.shape[0]:
        raise ShapeError(f"predicted class {predicted_class} out of range")
    return float(arr[predicted_class] @ p)


def bayes_decision(costs: TraditionalCostMatrix, posterior) -> int:
    """Risk-minimizing class; ties resolve to the lowest index."""
    p = validate_posterior(posterior)
    arr = costs.entries
    if p.size != arr.shape[0]:
        raise ShapeError(
            f"posterior has {p.size} classes, cost matrix has {arr.shape[0]}"
        )
    risks = arr @ p
    return int(np.argmin(risks))


def offset_columns(costs: TraditionalCostMatrix, c: float) -> TraditionalCostMatrix:
    """Add the constant ``c`` to every entry.

    Decisions are invariant under this offset; construction fails if an
    entry would become negative.
    """
    if not np.isfinite(c):
        raise NumericError("offset must be finite")
    return TraditionalCostMatrix(costs.entries + c)


def apply_score_costs(costs, true_class: int, activations) -> np.ndarray:
    """Hadamard product of the true class's cost row with the activations.

    ``costs`` may be a :class:`CostMatrix` or a raw square array (the
    latter allows probing degenerate matrices that fail validation).
    """
    arr = _entries_of(costs)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"cost matrix must be square, got shape {arr.shape}")
    o = np.asarray(activations, dtype=np.float64)
    if o.ndim != 1 or o.size != arr.shape[0]:
        raise ShapeError(
            f"activations have shape {o.shape}, expected ({arr.shape[0]},)"
        )
    if not 0 <= true_class < arr.shape[0]:
        raise ShapeError(f"true class {true_class} out of range")
    return arr[true_class] * o
