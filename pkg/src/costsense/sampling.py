"""Resampling baselines: SMOTE oversampling and random undersampling.

Both operate on the training split only and record provenance in the
returned dataset's ``meta`` so the synthesis geometry can be audited.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import LabeledDataset
from .errors import ConfigError, SamplingError


@dataclass(frozen=True)
class SmoteConfig:
    """Settings for minority-class interpolation.

    ``target`` is a per-class sample count or "match-majority".
    ``k_neighbors`` clamps to class_size - 1 for small classes.
    ``interpolation_override`` forces the mixing coefficient lambda to a
    fixed value (diagnostics; normal draws are uniform on [0, 1]).
    """

    k_neighbors: int = 5
    target: int | str = "match-majority"
    seed: int = 0
    interpolation_override: float | None = None

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be at least 1")
        if isinstance(self.target, str) and self.target != "match-majority":
            raise ConfigError(f"unknown target {self.target!r}")
        if not isinstance(self.target, str) and self.target < 1:
            raise ConfigError("target count must be positive")
        if self.interpolation_override is not None and not (
            0.0 <= self.interpolation_override <= 1.0
        ):
            raise ConfigError("interpolation_override must lie in [0, 1]")


def smote_oversample(ds: LabeledDataset, cfg: SmoteConfig) -> LabeledDataset:
    """Grow each under-target class with synthetic points.

    Every synthetic sample is x_i + lambda * (x_nn - x_i) for a random
    class member x_i, one of its k nearest same-class neighbours x_nn
    and lambda ~ U[0, 1]. Originals come first in the result; parent
    row indices and lambdas are stored under ``meta["smote_parents"]``
    and ``meta["smote_lambdas"]``.
    """
    hist = ds.class_histogram
    target = int(hist.max()) if cfg.target == "match-majority" else int(cfg.target)
    rng = np.random.default_rng(cfg.seed)

    new_features, new_labels = [ds.features], [ds.labels]
    parents, lambdas = [], []
    for c in range(ds.n_classes):
        needed = target - int(hist[c])
        if needed <= 0:
            continue
        members = np.flatnonzero(ds.labels == c)
        if members.size < 2:
            raise SamplingError(
                f"class {c} has {members.size} sample(s); interpolation "
                "needs at least 2"
            )
        k = min(cfg.k_neighbors, members.size - 1)
        dists = cdist(ds.features[members], ds.features[members])
        np.fill_diagonal(dists, np.inf)
        # k nearest same-class neighbours per member, nearest first
        neighbour_order = np.argsort(dists, axis=1, kind="stable")[:, :k]

        picked = rng.integers(0, members.size, size=needed)
        chosen_nn = rng.integers(0, k, size=needed)
        if cfg.interpolation_override is not None:
            lam = np.full(needed, cfg.interpolation_override)
        else:
            lam = rng.uniform(0.0, 1.0, size=needed)
        base = members[picked]
        nn = members[neighbour_order[picked, chosen_nn]]
        synthetic = ds.features[base] + lam[:, None] * (
            ds.features[nn] - ds.features[base]
        )
        new_features.append(synthetic)
        new_labels.append(np.full(needed, c, dtype=np.int64))
        parents.append(np.column_stack([base, nn]))
        lambdas.append(lam)

    meta = {
        "smote_parents": (
            np.vstack(parents) if parents else np.empty((0, 2), dtype=np.int64)
        ),
        "smote_lambdas": (
            np.concatenate(lambdas) if lambdas else np.empty(0)
        ),
    }
    return LabeledDataset(
        np.vstack(new_features), np.concatenate(new_labels), ds.n_classes, meta=meta
    )


def random_undersample(ds: LabeledDataset, target: int | str,
                       seed) -> LabeledDataset:
    """Cut each over-target class down to ``target`` samples.

    ``target`` is a count or "match-minority". Classes at or below the
    target pass through. Kept row indices land in
    ``meta["kept_indices"]``; class order and within-class order are
    preserved.
    """
    hist = ds.class_histogram
    if isinstance(target, str):
        if target != "match-minority":
            raise ConfigError(f"unknown target {target!r}")
        positive = hist[hist > 0]
        if positive.size == 0:
            raise SamplingError("dataset has no samples")
        n_target = int(positive.min())
    else:
        n_target = int(target)
    if n_target < 1:
        raise ConfigError(f"target must be at least 1, got {n_target}")

    rng = np.random.default_rng(seed)
    kept = []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        if members.size > n_target:
            members = np.sort(rng.choice(members, size=n_target, replace=False))
        kept.append(members)
    kept_idx = np.concatenate(kept)
    return LabeledDataset(
        ds.features[kept_idx], ds.labels[kept_idx], ds.n_classes,
        meta={"kept_indices": kept_idx},
    )
