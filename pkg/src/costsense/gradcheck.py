"""Finite-difference validation of the analytic gradients.

Central differences with step h compare against the closed-form
gradients, both at the loss level (gradient w.r.t. the output
activations) and end to end (gradient w.r.t. every weight and bias of a
small network). Errors are relative with a floor:

    err = |analytic - numeric| / max(|analytic|, |numeric|, floor)

The floor absorbs coordinates whose true gradient is tiny, where the
difference quotient is dominated by rounding noise. Hinge and ReLU are
only piecewise smooth, so configurations sitting within a few steps of
a kink are redrawn; the subgradient there is deliberately one-sided and
no difference quotient can match it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost_matrix import CostMatrix
from .losses import LossKind, forward, one_hot
from .network import Layer, Network, backward_pass, forward_pass, init_network

KINDS = (LossKind.MSE, LossKind.HINGE, LossKind.CROSS_ENTROPY)


@dataclass(frozen=True)
class GradCheckReport:
    max_errors: dict  # LossKind -> worst relative error observed
    n_configs: int
    n_coordinates: int

    @property
    def worst(self) -> float:
        return max(self.max_errors.values())


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-4) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.abs(a - b) / denom


def _random_costs(rng: np.random.Generator, n: int) -> CostMatrix:
    return CostMatrix(rng.uniform(0.05, 1.0, size=(n, n)))


def _draw_loss_config(rng: np.random.Generator, kind: LossKind, h: float):
    """Random (costs, target, o) kept clear of hinge kinks."""
    for _ in range(100):
        n = int(rng.integers(2, 7))
        costs = _random_costs(rng, n)
        true_class = int(rng.integers(n))
        o = rng.uniform(-10.0, 10.0, size=n)
        if kind is LossKind.HINGE:
            row = costs.entries[true_class]
            sign = 2.0 * one_hot(true_class, n) - 1.0
            margins = 1.0 - sign * (o * row)
            if np.min(np.abs(margins)) < 100.0 * h:
                continue
        return costs, true_class, o
    raise RuntimeError("could not draw a kink-free configuration")


def loss_gradient_errors(trials: int = 200, seed: int = 0, h: float = 1e-5,
                         floor: float = 1e-4) -> GradCheckReport:
    """Worst relative error of each loss gradient over random configs."""
    rng = np.random.default_rng(seed)
    worst = {kind: 0.0 for kind in KINDS}
    coords = 0
    for _ in range(trials):
        for kind in KINDS:
            costs, true_class, o = _draw_loss_config(rng, kind, h)
            d = one_hot(true_class, costs.n_classes)
            analytic = forward(kind, costs, d, o).gradient_wrt_o
            numeric = np.empty_like(o)
            for i in range(o.size):
                plus, minus = o.copy(), o.copy()
                plus[i] += h
                minus[i] -= h
                numeric[i] = (
                    forward(kind, costs, d, plus).value
                    - forward(kind, costs, d, minus).value
                ) / (2.0 * h)
            worst[kind] = max(worst[kind],
                              float(relative_error(analytic, numeric, floor).max()))
            coords += o.size
    return GradCheckReport(worst, trials, coords)


def _draw_network_config(rng: np.random.Generator, h: float):
    """Random small net + sample, redrawn until clear of ReLU/hinge kinks."""
    for _ in range(200):
        depth = int(rng.integers(1, 5))  # number of weight layers
        n_classes = int(rng.integers(2, 7))
        dims = [int(rng.integers(2, 9))]
        dims += [int(rng.integers(2, 17)) for _ in range(depth - 1)]
        dims += [n_classes]
        net = init_network(dims, int(rng.integers(2**31)))
        x = rng.uniform(-2.0, 2.0, size=dims[0])
        costs = _random_costs(rng, n_classes)
        true_class = int(rng.integers(n_classes))

        o, _, cache = forward_pass(net, x)
        # ReLU pre-activations near zero make the loss locally non-smooth
        # in the parameters; margins near zero do the same for hinge.
        preacts = np.concatenate(
            [cache.preacts[i].ravel() for i in range(depth - 1)]
        ) if depth > 1 else np.array([1.0])
        if np.min(np.abs(preacts)) < 1e-3:
            continue
        row = costs.entries[true_class]
        sign = 2.0 * one_hot(true_class, n_classes) - 1.0
        margins = 1.0 - sign * (o * row)
        if np.min(np.abs(margins)) < 1e-3:
            continue
        return net, costs, true_class, x
    raise RuntimeError("could not draw a kink-free network configuration")


def _replace_entry(net: Network, layer_i: int, which: str, index, value: float
                   ) -> Network:
    layers = list(net.layers)
    layer = layers[layer_i]
    if which == "w":
        w = layer.weights.copy()
        w[index] = value
        layers[layer_i] = Layer(w, layer.bias, layer.activation)
    else:
        b = layer.bias.copy()
        b[index] = value
        layers[layer_i] = Layer(layer.weights, b, layer.activation)
    return Network(tuple(layers))


def network_gradient_errors(configs: int = 60, seed: int = 0, h: float = 1e-5,
                            floor: float = 1e-4) -> GradCheckReport:
    """End-to-end parameter-gradient check for every loss kind.

    ``configs`` random networks are drawn per loss (depth <= 4 weight
    layers, widths <= 16); every weight and bias is perturbed.
    """
    rng = np.random.default_rng(seed)
    worst = {kind: 0.0 for kind in KINDS}
    coords = 0
    for kind in KINDS:
        for _ in range(configs):
            net, costs, true_class, x = _draw_network_config(rng, h)
            d = one_hot(true_class, costs.n_classes)

            def loss_of(candidate: Network) -> float:
                o, _, _ = forward_pass(candidate, x)
                return forward(kind, costs, d, o).value

            o, _, cache = forward_pass(net, x)
            grads = backward_pass(net, cache,
                                  forward(kind, costs, d, o).gradient_wrt_o)

            for layer_i, layer in enumerate(net.layers):
                dw, db = grads[layer_i]
                for index in np.ndindex(layer.weights.shape):
                    center = layer.weights[index]
                    fp = loss_of(_replace_entry(net, layer_i, "w", index, center + h))
                    fm = loss_of(_replace_entry(net, layer_i, "w", index, center - h))
                    err = relative_error(dw[index], (fp - fm) / (2 * h), floor)
                    worst[kind] = max(worst[kind], float(err))
                    coords += 1
                for j in range(layer.bias.size):
                    center = layer.bias[j]
                    fp = loss_of(_replace_entry(net, layer_i, "b", j, center + h))
                    fm = loss_of(_replace_entry(net, layer_i, "b", j, center - h))
                    err = relative_error(db[j], (fp - fm) / (2 * h), floor)
                    worst[kind] = max(worst[kind], float(err))
                    coords += 1
    return GradCheckReport(worst, configs * len(KINDS), coords)
