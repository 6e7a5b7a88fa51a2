"""Alternating cost and weight optimization on an imbalanced task.

Five Gaussian blobs; classes 2, 3 and 4 keep only a tenth of their
training samples. A plain network drifts toward the majority classes.
The alternating optimizer interleaves one cost step per epoch with the
usual SGD, accepting the step only when validation error does not
degrade, and ends up with a cost matrix that concedes less training
weight to the majority competitors of the starved classes.
"""

import numpy as np

from costsense import (
    CostObjectiveParams,
    LossKind,
    SgdConfig,
    SplitSpec,
    alternating_optimize,
    apply_imbalance_protocol,
    evaluate,
    generate_gaussian_task,
    init_network,
    train_baseline,
)

MINORITY = (2, 3, 4)


def build_task():
    ds = generate_gaussian_task(5, 16, 300, seed=11, radius=2.2)
    spec = SplitSpec(train_fraction=1 / 3, val_fraction=0.2,
                     retention={c: 0.1 for c in MINORITY}, seed=12)
    return apply_imbalance_protocol(ds, spec)


def history_table(history, head=3, tail=3):
    print("  epoch  train_loss  val_error  gamma    accepted  xi_min")
    rows = history[:head] + history[-tail:]
    for rec in rows:
        print(f"  {rec.epoch:>5}  {rec.train_loss:>10.4f}  "
              f"{rec.val_error:>9.4f}  {rec.gamma_xi:<7.3g}  "
              f"{str(rec.accepted):<8}  {rec.xi_min:.4f}")
        if rec is rows[head - 1] and len(history) > head + tail:
            print("  ...")


def main():
    train, val, test = build_task()
    print(f"train histogram: {train.class_histogram} (classes {MINORITY} starved)")
    print(f"test histogram:  {test.class_histogram}")

    dims = (train.features.shape[1], 32, train.n_classes)
    sgd = SgdConfig(learning_rate=0.1, batch_size=16, epochs=25, seed=13)

    print("\n== plain training ==")
    base_net, base_hist = train_baseline(
        init_network(dims, seed=14), train, val, LossKind.CROSS_ENTROPY, sgd)
    history_table(base_hist)

    print("\n== alternating cost adaptation ==")
    params = CostObjectiveParams(gamma_xi=1.0, sigma1=5.0, mu2=1.0, sigma2=1.0)
    cosen_net, costs, cosen_hist = alternating_optimize(
        train, val, init_network(dims, seed=14), LossKind.CROSS_ENTROPY,
        sgd, params)
    history_table(cosen_hist)
    rejected = sum(not rec.accepted for rec in cosen_hist)
    print(f"  rejected cost steps: {rejected} of {len(cosen_hist)}")
    print("\nfinal cost matrix (rows = true class):")
    print(np.array2string(costs.entries, precision=3, suppress_small=True))

    print("\n== per-class test accuracy ==")
    base = evaluate(base_net, test)
    cosen = evaluate(cosen_net, test)
    print("  class     plain  adapted")
    for c in range(test.n_classes):
        tag = " <- starved" if c in MINORITY else ""
        print(f"  {c:<7}  {base.per_class_accuracy[c]:>6.3f}  "
              f"{cosen.per_class_accuracy[c]:>7.3f}{tag}")
    print(f"  average  {base.average_class_accuracy:>6.3f}  "
          f"{cosen.average_class_accuracy:>7.3f}")


if __name__ == "__main__":
    main()
