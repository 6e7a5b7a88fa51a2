"""Cost-sensitive neural network training for class-imbalanced data.

The package separates decision-level costs (additive matrices entering
the Bayes risk) from score-level costs (multiplicative matrices in
(0, 1] that reshape the training losses). Score-level costs can be
learned jointly with the network by alternating optimization; the
trained network is served without any cost machinery.
"""

from .cost_adapt import (
    ConfusionMatrix,
    CostObjectiveParams,
    EpochRecord,
    HistogramMatrix,
    SeparabilityMatrix,
    alternating_optimize,
    build_target,
    class_separability,
    confusion_matrix,
    cost_gradient,
    fixed_cost_matrix,
    histogram_matrix,
    train_baseline,
    update_costs,
)
from .cost_matrix import (
    CostMatrix,
    TraditionalCostMatrix,
    all_ones_costs,
    apply_score_costs,
    bayes_decision,
    expected_risk,
    offset_columns,
    validate_cost_matrix,
)
from .data import (
    LabeledDataset,
    SplitSpec,
    apply_imbalance_protocol,
    generate_gaussian_task,
    load_csv,
    load_idx,
    take,
)
from .errors import CostsenseError
from .experiment import ExperimentConfig, load_config, run_experiment
from .losses import (
    LossEvaluation,
    LossKind,
    backward,
    calibration_stationary_output,
    check_guess_aversion,
    cost_softmax,
    forward,
    one_hot,
    standard_softmax,
)
from .metrics import MetricsReport, compare_runs, dataset_fingerprint, evaluate
from .network import (
    Network,
    SgdConfig,
    backward_pass,
    forward_pass,
    init_network,
    load_checkpoint,
    predict,
    predict_batch,
    save_checkpoint,
    sgd_step,
)
from .sampling import SmoteConfig, random_undersample, smote_oversample

__version__ = "0.1.0"
