"""Alternating optimization of network weights and score-level costs.

The cost matrix is treated as a second set of parameters. Each epoch
builds a data-driven target matrix T from three ingredients measured on
the current state of training:

* H, a class-frequency matrix: diagonal h_p, off-diagonal max(h_p, h_q);
* S, class-to-class separability of the penultimate-layer features on
  the validation set (small values mean well separated);
* M, the row-normalized confusion matrix of current validation
  predictions.

T(p, q) = H(p, q) * exp(-(S(p,q) - mu1)^2 / (2 sigma1^2))
                  * exp(-(M(p,q) - mu2)^2 / (2 sigma2^2)), clipped into
[EPS_MIN, 1]. The costs take one gradient step toward T per epoch; the
step is kept only if validation error does not rise above the best
previously accepted value, otherwise it is reverted and the cost step
size decays by a factor of 100. Network weights train by plain
mini-batch SGD throughout, and with a zero cost step size the whole
procedure reproduces cost-insensitive training exactly.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import losses
from .cost_matrix import CostMatrix, all_ones_costs
from .data import LabeledDataset
from .errors import ConfigError, NumericError, ParseError, ShapeError, StateError
from .losses import LossKind
from .network import Network, SgdConfig, forward_batch, backward_batch, sgd_step

# Lower clip for cost entries and target matrices.
EPS_MIN = 1e-4

# Floor for standard deviations derived from S and M.
SIGMA_FLOOR = 0.05


class DegenerateCostWarning(UserWarning):
    """A cost source matrix carried no usable structure."""


@dataclass(frozen=True)
class SeparabilityMatrix:
    """Mean intra/inter nearest-neighbour distance ratios between classes.

    Entry (p, q) averages, over samples of class p, the ratio of the
    distance to the nearest same-class sample to the distance to the
    nearest class-q sample. The diagonal is 1 by convention. Classes
    with fewer than two samples make entries undefined; those are
    filled with the mean of the defined off-diagonal entries and the
    classes are listed in ``degenerate_classes``.
    """

    matrix: np.ndarray
    degenerate_classes: tuple[int, ...] = ()


@dataclass(frozen=True)
class HistogramMatrix:
    """Class-frequency structure: fractions h and the matrix H."""

    fractions: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True)
class ConfusionMatrix:
    """Raw counts (rows = true class) plus the row-normalized form.

    Rows with no samples normalize to uniform and are flagged in
    ``degenerate_rows``.
    """

    counts: np.ndarray
    row_normalized: np.ndarray
    degenerate_rows: tuple[int, ...] = ()


@dataclass(frozen=True)
class CostObjectiveParams:
    """Gaussian centers/widths for the target matrix and the cost step size.

    ``None`` for any mu/sigma means: derive it from the off-diagonal
    entries of the current S or M at each use (self-normalizing), with
    the derived standard deviations floored at SIGMA_FLOOR.
    """

    gamma_xi: float
    mu1: float | None = None
    sigma1: float | None = None
    mu2: float | None = None
    sigma2: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.gamma_xi) and self.gamma_xi >= 0):
            raise ConfigError("gamma_xi must be finite and non-negative")
        for name in ("sigma1", "sigma2"):
            value = getattr(self, name)
            if value is not None and not (np.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be positive when given")
        for name in ("mu1", "mu2"):
            value = getattr(self, name)
            if value is not None and not np.isfinite(value):
                raise ConfigError(f"{name} must be finite when given")

    def resolve(self, separability, confusion) -> "CostObjectiveParams":
        """Fill in unset mu/sigma values from the given S and M."""
        s = _matrix_of(separability)
        m = _matrix_of(confusion)
        mu1, sigma1 = _offdiag_stats(s, self.mu1, self.sigma1)
        mu2, sigma2 = _offdiag_stats(m, self.mu2, self.sigma2)
        return CostObjectiveParams(self.gamma_xi, mu1, sigma1, mu2, sigma2)


def _offdiag_stats(matrix: np.ndarray, mu, sigma):
    if mu is not None and sigma is not None:
        return float(mu), float(sigma)
    off = matrix[~np.eye(matrix.shape[0], dtype=bool)]
    off = off[np.isfinite(off)]
    derived_mu = float(off.mean()) if off.size else 0.0
    derived_sigma = max(float(off.std()) if off.size else 0.0, SIGMA_FLOOR)
    return (
        derived_mu if mu is None else float(mu),
        derived_sigma if sigma is None else float(sigma),
    )


def _matrix_of(obj) -> np.ndarray:
    if isinstance(obj, SeparabilityMatrix):
        return obj.matrix
    if isinstance(obj, HistogramMatrix):
        return obj.matrix
    if isinstance(obj, ConfusionMatrix):
        return obj.row_normalized
    return np.asarray(obj, dtype=np.float64)


def class_separability(features, labels, n_classes: int) -> SeparabilityMatrix:
    """Measure how mixed each class pair is in feature space.

    ``features`` is (n, d), ``labels`` is (n,). Euclidean distances.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ShapeError("features must be (n, d) with one label per row")
    counts = np.bincount(y, minlength=n_classes)

    by_class = [x[y == c] for c in range(n_classes)]
    # Nearest same-class neighbour per sample (self excluded); defined
    # only for classes holding at least two samples.
    intra = [None] * n_classes
    for c in range(n_classes):
        if counts[c] >= 2:
            d = cdist(by_class[c], by_class[c])
            np.fill_diagonal(d, np.inf)
            intra[c] = d.min(axis=1)

    s = np.full((n_classes, n_classes), np.nan)
    np.fill_diagonal(s, 1.0)
    with np.errstate(divide="ignore"):
        for p in range(n_classes):
            if intra[p] is None:
                continue
            for q in range(n_classes):
                if q == p or counts[q] == 0:
                    continue
                inter = cdist(by_class[p], by_class[q]).min(axis=1)
                s[p, q] = np.mean(intra[p] / inter)

    undefined = np.isnan(s)
    degenerate = tuple(c for c in range(n_classes) if counts[c] < 2)
    if undefined.any():
        defined_off = s[~np.eye(n_classes, dtype=bool) & ~undefined]
        fill = float(defined_off.mean()) if defined_off.size else 1.0
        s[undefined] = fill
    return SeparabilityMatrix(s, degenerate)


def histogram_matrix(labels, n_classes: int) -> HistogramMatrix:
    """Class fractions h and the matrix H(p,q) = max(h_p, h_q), H(p,p) = h_p."""
    y = np.asarray(labels)
    if y.size == 0:
        raise ShapeError("cannot build a histogram from zero labels")
    counts = np.bincount(y, minlength=n_classes)
    h = counts / counts.sum()
    matrix = np.maximum.outer(h, h)
    np.fill_diagonal(matrix, h)
    return HistogramMatrix(h, matrix)


def confusion_matrix(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape or t.ndim != 1:
        raise ShapeError("true and predicted labels must be equal-length vectors")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    row_sums = counts.sum(axis=1)
    degenerate = tuple(int(c) for c in np.flatnonzero(row_sums == 0))
    safe = np.where(row_sums == 0, 1, row_sums)
    normalized = counts / safe[:, None]
    for c in degenerate:
        normalized[c] = 1.0 / n_classes
    return ConfusionMatrix(counts, normalized, degenerate)


def build_target(histogram, separability, confusion,
                 params: CostObjectiveParams) -> np.ndarray:
    """Target cost matrix T from H, S and M; entries clipped into [EPS_MIN, 1]."""
    h = _matrix_of(histogram)
    s = _matrix_of(separability)
    m = _matrix_of(confusion)
    if not (h.shape == s.shape == m.shape) or h.ndim != 2:
        raise ShapeError("H, S and M must share one square shape")
    r = params.resolve(s, m)
    t = (
        h
        * np.exp(-((s - r.mu1) ** 2) / (2.0 * r.sigma1**2))
        * np.exp(-((m - r.mu2) ** 2) / (2.0 * r.sigma2**2))
    )
    return np.clip(t, EPS_MIN, 1.0)


def cost_gradient(target: np.ndarray, cost_entries: np.ndarray) -> np.ndarray:
    """Descent direction of 0.5 * ||T - xi||^2 with respect to xi.

    Equals -(T - xi) elementwise; stepping against it moves xi toward T.
    """
    t = np.asarray(target, dtype=np.float64)
    xi = np.asarray(cost_entries, dtype=np.float64)
    if t.shape != xi.shape:
        raise ShapeError("target and cost matrix disagree in shape")
    return -(t - xi)


def update_costs(costs: CostMatrix, direction: np.ndarray,
                 gamma_xi: float) -> CostMatrix:
    """xi <- clip(xi - gamma * direction, EPS_MIN, 1); validated."""
    d = np.asarray(direction, dtype=np.float64)
    if not np.all(np.isfinite(d)):
        raise NumericError("cost update direction contains non-finite values")
    if d.shape != costs.entries.shape:
        raise ShapeError("direction and cost matrix disagree in shape")
    return CostMatrix(np.clip(costs.entries - gamma_xi * d, EPS_MIN, 1.0))


def fixed_cost_matrix(source: str, *, histogram=None, separability=None,
                      confusion=None) -> CostMatrix:
    """Freeze one of H, S, M into a static score cost matrix.

    The chosen matrix is rescaled by its maximum when entries exceed 1,
    then clipped into [EPS_MIN, 1]. An all-equal source carries no
    class structure: the result falls back to all-ones and a
    DegenerateCostWarning is emitted.
    """
    chosen = {"h": histogram, "s": separability, "m": confusion}.get(source)
    if source not in ("h", "s", "m"):
        raise ConfigError(f"unknown fixed cost source {source!r}")
    if chosen is None:
        raise ConfigError(f"fixed cost source {source!r} requires its matrix")
    a = _matrix_of(chosen).copy()
    if not np.all(np.isfinite(a)):
        raise NumericError("fixed cost source contains non-finite entries")
    if np.ptp(a) == 0.0:
        warnings.warn(
            f"source {source!r} is all-equal; falling back to all-ones",
            DegenerateCostWarning,
        )
        return all_ones_costs(a.shape[0])
    if a.max() > 1.0:
        a = a / a.max()
    return CostMatrix(np.clip(a, EPS_MIN, 1.0))


# ---------------------------------------------------------------------------
# Training loops.


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_error: float
    gamma_xi: float
    accepted: bool
    xi_min: float
    xi_max: float
    seconds: float
    xi: np.ndarray | None = field(default=None, repr=False)


def _run_epoch(net: Network, x: np.ndarray, labels: np.ndarray,
               cost_entries: np.ndarray | None, kind: LossKind,
               sgd: SgdConfig, rng: np.random.Generator):
    """All mini-batches of one epoch; returns (net, mean sample loss)."""
    order = rng.permutation(labels.size)
    loss_sum = 0.0
    for start in range(0, labels.size, sgd.batch_size):
        idx = order[start : start + sgd.batch_size]
        outputs, _, cache = forward_batch(net, x[idx])
        if cost_entries is None:
            values, grads_o = losses.standard_forward_batch(kind, labels[idx], outputs)
        else:
            values, grads_o = losses.forward_batch(kind, cost_entries, labels[idx], outputs)
        grads = backward_batch(net, cache, grads_o)
        net = sgd_step(net, grads, sgd)
        loss_sum += float(values.sum())
    return net, loss_sum / labels.size


def _evaluate_split(net: Network, ds: LabeledDataset):
    """Predictions, penultimate features and error rate on a dataset."""
    outputs, feats, _ = forward_batch(net, ds.features)
    preds = np.argmax(outputs, axis=1)
    return preds, feats, float(np.mean(preds != ds.labels))


def _check_training_inputs(train, val, net):
    if train.n_samples == 0 or val.n_samples == 0:
        raise ConfigError("training and validation sets must be non-empty")
    if train.n_classes != val.n_classes:
        raise StateError("train and validation disagree on the class count")
    if net.output_dim != train.n_classes:
        raise StateError(
            f"network emits {net.output_dim} scores for {train.n_classes} classes"
        )
    if net.input_dim != train.features.shape[1]:
        raise StateError("network input width does not match the features")


def train_baseline(net: Network, train: LabeledDataset, val: LabeledDataset,
                   kind: LossKind, sgd: SgdConfig):
    """Cost-insensitive reference training; returns (net, history)."""
    _check_training_inputs(train, val, net)
    rng = np.random.default_rng(sgd.seed)
    history: list[EpochRecord] = []
    for epoch in range(1, sgd.epochs + 1):
        started = time.perf_counter()
        net, train_loss = _run_epoch(net, train.features, train.labels, None,
                                     kind, sgd, rng)
        _, _, val_error = _evaluate_split(net, val)
        history.append(EpochRecord(
            epoch, train_loss, val_error, 0.0, True, 1.0, 1.0,
            time.perf_counter() - started,
        ))
    return net, history


def alternating_optimize(
    train: LabeledDataset,
    val: LabeledDataset,
    net: Network,
    kind: LossKind,
    sgd: SgdConfig,
    params: CostObjectiveParams,
    *,
    initial_costs: CostMatrix | None = None,
    separability_every: int = 10,
):
    """Joint training of weights and costs; returns (net, costs, history).

    Per epoch: build T from (H, S, M), take one tentative cost step
    toward it, run the epoch's SGD under the tentative costs, then keep
    the step only if end-of-epoch validation error does not exceed the
    best previously accepted value. A rejected step reverts the costs
    (the weight updates stand) and decays gamma_xi by x0.01. S is
    recomputed every ``separability_every`` epochs, H once, M every
    epoch, all from the validation set except H which uses the training
    distribution.
    """
    _check_training_inputs(train, val, net)
    if separability_every < 1:
        raise ConfigError("separability_every must be at least 1")
    n_classes = train.n_classes
    costs = initial_costs if initial_costs is not None else all_ones_costs(n_classes)
    if costs.n_classes != n_classes:
        raise StateError("initial costs disagree with the class count")

    gamma = params.gamma_xi
    best_val_error = 1.0
    hist_matrix = histogram_matrix(train.labels, n_classes)
    rng = np.random.default_rng(sgd.seed)
    preds, feats, _ = _evaluate_split(net, val)
    separability = None
    history: list[EpochRecord] = []

    for epoch in range(1, sgd.epochs + 1):
        started = time.perf_counter()
        if (epoch - 1) % separability_every == 0:
            separability = class_separability(feats, val.labels, n_classes)
        confusion = confusion_matrix(val.labels, preds, n_classes)
        target = build_target(hist_matrix, separability, confusion, params)
        direction = cost_gradient(target, costs.entries)
        tentative = update_costs(costs, direction, gamma)

        net, train_loss = _run_epoch(net, train.features, train.labels,
                                     tentative.entries, kind, sgd, rng)
        preds, feats, val_error = _evaluate_split(net, val)

        accepted = val_error <= best_val_error
        if accepted:
            costs = tentative
            best_val_error = val_error
        else:
            gamma *= 0.01
        history.append(EpochRecord(
            epoch, train_loss, val_error, gamma, accepted,
            float(costs.entries.min()), float(costs.entries.max()),
            time.perf_counter() - started, costs.entries.copy(),
        ))
    return net, costs, history


# ---------------------------------------------------------------------------
# History files: one JSON record per epoch.

HISTORY_FIELDS = ("epoch", "train_loss", "val_error", "gamma_xi", "accepted",
                  "xi_min", "xi_max", "seconds")


def save_history(history, path) -> None:
    with open(path, "w") as fh:
        for rec in history:
            fh.write(json.dumps({f: getattr(rec, f) for f in HISTORY_FIELDS}) + "\n")


def load_history(path) -> list[EpochRecord]:
    records = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            records.append(EpochRecord(**{f: raw[f] for f in HISTORY_FIELDS}))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ParseError(f"{path}:{line_no}: bad history record ({exc})") from exc
    return records
