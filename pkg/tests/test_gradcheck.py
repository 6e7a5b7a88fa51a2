"""Finite-difference gradient validation harness."""

import numpy as np

from costsense.gradcheck import (
    GradCheckReport,
    loss_gradient_errors,
    network_gradient_errors,
    relative_error,
)
from costsense.losses import LossKind


class TestRelativeError:
    def test_equal_arrays_give_zero(self):
        a = np.array([1.0, -2.0, 0.0])
        assert relative_error(a, a.copy()).max() == 0.0

    def test_floor_absorbs_tiny_gradients(self):
        # both values far below the floor: denominator is the floor itself
        err = relative_error(np.array([1e-9]), np.array([3e-9]), floor=1e-4)
        assert err[0] == abs(1e-9 - 3e-9) / 1e-4

    def test_large_values_use_the_larger_magnitude(self):
        err = relative_error(np.array([2.0]), np.array([1.0]), floor=1e-4)
        assert err[0] == 0.5

    def test_symmetric_in_arguments(self):
        a = np.array([0.3, -1.7, 4.0])
        b = np.array([0.31, -1.69, 3.9])
        assert np.array_equal(relative_error(a, b), relative_error(b, a))


class TestLossGradientErrors:
    def test_small_run_stays_accurate(self):
        report = loss_gradient_errors(trials=25, seed=3)
        assert isinstance(report, GradCheckReport)
        assert set(report.max_errors) == {
            LossKind.MSE, LossKind.HINGE, LossKind.CROSS_ENTROPY,
        }
        assert report.worst < 1e-5
        assert report.n_configs == 25
        assert report.n_coordinates >= 25 * 3 * 2

    def test_worst_is_the_max_over_kinds(self):
        report = loss_gradient_errors(trials=10, seed=0)
        assert report.worst == max(report.max_errors.values())

    def test_same_seed_same_report(self):
        a = loss_gradient_errors(trials=8, seed=11)
        b = loss_gradient_errors(trials=8, seed=11)
        assert a.max_errors == b.max_errors
        assert a.n_coordinates == b.n_coordinates


class TestNetworkGradientErrors:
    def test_end_to_end_parameter_gradients_match(self):
        report = network_gradient_errors(configs=5, seed=2)
        assert report.worst < 1e-5
        assert report.n_configs == 15  # 5 per loss kind
        assert report.n_coordinates > 0

    def test_same_seed_same_report(self):
        a = network_gradient_errors(configs=3, seed=9)
        b = network_gradient_errors(configs=3, seed=9)
        assert a.max_errors == b.max_errors
