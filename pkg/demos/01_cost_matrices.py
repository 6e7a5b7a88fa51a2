"""Two kinds of cost matrix and what each one changes.

Additive matrices act at decision time: they enter the Bayes risk and
can flip the predicted class away from the posterior argmax. Score
matrices act at training time: they re-weight the softmax inside the
loss and never touch the served model. This script walks through both.
"""

import numpy as np

from costsense import (
    CostMatrix,
    TraditionalCostMatrix,
    all_ones_costs,
    bayes_decision,
    cost_softmax,
    expected_risk,
    offset_columns,
    standard_softmax,
)

CLASSES = ("healthy", "mild", "severe")


def decision_costs():
    print("== additive costs shift the decision ==")
    # Rows = predicted, columns = true. Calling a severe case healthy
    # is the expensive mistake.
    costs = TraditionalCostMatrix([
        [0.0, 2.0, 16.0],
        [1.0, 0.0, 5.0],
        [2.0, 1.0, 0.0],
    ])
    posterior = np.array([0.55, 0.25, 0.20])
    print(f"posterior:       {posterior}")
    print(f"posterior argmax: {CLASSES[int(np.argmax(posterior))]}")
    for k, name in enumerate(CLASSES):
        risk = expected_risk(costs, posterior, k)
        print(f"  risk of predicting {name:<8} {risk:.3f}")
    decided = bayes_decision(costs, posterior)
    print(f"risk-minimizing choice: {CLASSES[decided]}")

    print("\n== the decision ignores constant offsets ==")
    rng = np.random.default_rng(7)
    flips = 0
    for _ in range(200):
        p = rng.dirichlet(np.ones(3))
        shifted = offset_columns(costs, float(rng.uniform(0.0, 9.0)))
        flips += int(bayes_decision(costs, p) != bayes_decision(shifted, p))
    print(f"decision changes across 200 random posteriors and offsets: {flips}")


def score_costs():
    print("\n== score costs reshape the training softmax ==")
    o = np.array([1.0, 0.4, -0.2])
    neutral = all_ones_costs(3)
    print(f"activations:           {o}")
    print(f"plain softmax:         {standard_softmax(o).round(4)}")
    print(f"all-ones cost softmax: {cost_softmax(neutral, 0, o).round(4)}")

    # Entry (p, q) scales competitor q's exponential when the true class
    # is p. Discounting a competitor concedes it less training weight.
    discounted = CostMatrix([
        [1.0, 0.3, 1.0],
        [1.0, 1.0, 1.0],
        [1.0, 1.0, 1.0],
    ])
    y = cost_softmax(discounted, 0, o)
    print(f"xi[0][1] = 0.3:        {y.round(4)}")
    print("the true class gains probability mass at identical activations,")
    print("so the loss is satisfied at a smaller raw margin against class 1")

    print("\nserving never sees either matrix: predictions are a plain")
    print("argmax over the trained network's outputs")


def main():
    decision_costs()
    score_costs()


if __name__ == "__main__":
    main()
