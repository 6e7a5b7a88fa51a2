"""The three cost-aware losses and their gradient guarantees.

Each loss consumes the true class's cost row: MSE squashes cost-scaled
activations through a sigmoid, hinge applies the costs to the margins,
and cross entropy re-weights the softmax. The cross entropy gradient
collapses to squashed-output minus target, which this script verifies
directly before running the package's finite-difference checks.
"""

import numpy as np

from costsense import CostMatrix, LossKind, backward, cost_softmax, forward, one_hot
from costsense.gradcheck import (
    loss_gradient_errors,
    network_gradient_errors,
    relative_error,
)


def single_sample():
    print("== one sample, three losses ==")
    costs = CostMatrix([
        [1.0, 0.4, 0.7],
        [0.9, 1.0, 1.0],
        [1.0, 1.0, 1.0],
    ])
    target = one_hot(0, 3)
    o = np.array([0.8, 0.1, -0.5])
    print(f"activations: {o}, true class 0, cost row {costs.entries[0]}")
    for kind in LossKind:
        ev = forward(kind, costs, target, o)
        print(f"  {kind.value:<5} value {ev.value:8.4f}  "
              f"squashed {np.round(ev.squashed_outputs, 4)}  "
              f"grad {np.round(ev.gradient_wrt_o, 4)}")


def ce_gradient_identity():
    print("\n== ce gradient equals squashed output minus target ==")
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        costs = CostMatrix(rng.uniform(0.05, 1.0, size=(n, n)))
        p = int(rng.integers(n))
        o = rng.normal(size=n) * 5.0
        d = one_hot(p, n)
        grad = backward(LossKind.CROSS_ENTROPY, costs, d, o)
        y = cost_softmax(costs, p, o)
        worst = max(worst, float(np.max(np.abs(grad - (y - d)))))
    print(f"max |grad - (y - d)| over 1000 draws: {worst:.3e}")


def finite_differences():
    print("\n== finite differences agree with backprop ==")
    # Same check the `costsense gradcheck` subcommand runs.
    loss_report = loss_gradient_errors(trials=50, seed=0)
    net_report = network_gradient_errors(configs=10, seed=0)
    for name, report in (("loss", loss_report), ("network", net_report)):
        for kind, err in report.max_errors.items():
            print(f"  {name:<8} {kind.value:<5} max relative error {err:.3e}")
    print(f"  floor applied below 1e-4, e.g. "
          f"relative_error(1e-9, 3e-9) = {relative_error(1e-9, 3e-9):.3e}")


def main():
    single_sample()
    ce_gradient_identity()
    finite_differences()


if __name__ == "__main__":
    main()
