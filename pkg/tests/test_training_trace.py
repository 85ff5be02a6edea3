"""
Test Training Trace - Epoch records, reports and the optimizer loop
"""

import json

import numpy as np
import pytest

from hamlearn.errors import ConfigError, DivergenceError
from hamlearn.optim import Adam, GradientDescent, make_optimizer, optimize
from hamlearn.training_trace import TrainingTrace, format_csv


def _quadratic(center):
    center = np.asarray(center, dtype=float)

    def value_and_grad(x):
        d = x - center
        return float(np.sum(d ** 2)), 2 * d

    return value_and_grad


class TestTrainingTrace:
    """Tests for TrainingTrace."""

    def test_initialization(self):
        trace = TrainingTrace()
        assert trace.epochs == 0
        assert trace.stop_reason == "not started"
        assert trace.final_trace_distance is None
        assert trace.final_validation_error is None

    def test_record(self):
        trace = TrainingTrace(snapshot_every=2)
        for epoch, cost in enumerate([4.0, 2.0, 1.0]):
            trace.record(epoch, cost, [epoch, -epoch])
        assert trace.epochs == 2
        assert trace.initial_cost == 4.0
        assert trace.final_cost == 1.0
        assert trace.cost_reduction_factor == 4.0
        assert trace.final_params == [2.0, -2.0]
        assert sorted(trace.snapshots()) == [0, 2]

    def test_invalid_cost(self):
        trace = TrainingTrace()
        with pytest.raises(DivergenceError):
            trace.record(0, float("nan"), [0.0])
        with pytest.raises(DivergenceError):
            trace.record(0, -1.0, [0.0])

    def test_invalid_snapshot_period(self):
        with pytest.raises(ValueError):
            TrainingTrace(snapshot_every=0)

    def test_final_trace_distance_skips_gaps(self):
        trace = TrainingTrace()
        trace.record(0, 1.0, [0.0], trace_distance=0.5)
        trace.record(1, 0.5, [0.1])
        assert trace.final_trace_distance == 0.5

    def test_report_and_summary(self):
        trace = TrainingTrace()
        trace.record(0, 1.0, [0.0], trace_distance=0.3)
        trace.record(1, 0.01, [0.5], trace_distance=0.01)
        trace.final_validation = {"ZM": 1e-4, "XXX": 2e-4}
        trace.stop_reason = "epoch cap"
        report = trace.report()
        assert report["epochs"] == 1
        assert report["cost_reduction_factor"] == pytest.approx(100.0)
        assert trace.final_validation_error == 2e-4
        summary = trace.summary()
        assert summary.startswith("Training Report")
        assert "Validation XXX" in summary

    def test_reset(self):
        trace = TrainingTrace()
        trace.record(0, 1.0, [0.0])
        trace.final_validation = {"ZM": 0.1}
        trace.reset()
        assert trace.records == []
        assert trace.final_params is None
        assert trace.final_validation_error is None

    def test_csv_export(self, tmp_path):
        trace = TrainingTrace()
        trace.record(0, 0.25, [0.0], trace_distance=0.125)
        trace.record(1, 1.0 / 3, [0.0])
        path = tmp_path / "trace.csv"
        trace.to_csv(str(path))
        lines = path.read_text().splitlines()
        assert lines == ["epoch,cost,trace_distance,validation_error",
                         "0,0.25,0.125,", "1,0.3333333333,,"]

    def test_json_export(self, tmp_path):
        trace = TrainingTrace()
        trace.record(0, 1.0, [0.5])
        trace.metadata = {"learner": "hamiltonian"}
        path = tmp_path / "trace.json"
        trace.to_json(str(path))
        doc = json.loads(path.read_text())
        assert doc["metadata"]["learner"] == "hamiltonian"
        assert doc["epochs"][0]["params"] == [0.5]

    def test_format_csv(self):
        assert format_csv(None) == ""
        assert format_csv(1e-20) == "1e-20"


class TestOptimizers:
    """Tests for the update rules."""

    def test_gradient_descent_step(self):
        opt = GradientDescent(0.1, lr_decay=0.5)
        assert np.allclose(opt.step(np.array([1.0]), np.array([2.0]), 0), [0.8])
        assert np.allclose(opt.step(np.array([1.0]), np.array([2.0]), 1), [0.9])

    def test_adam_first_step(self):
        """Bias correction makes the first Adam step lr * sign(grad)."""
        opt = Adam(0.1)
        out = opt.step(np.array([1.0, 1.0]), np.array([3.0, -0.5]), 0)
        assert np.allclose(out, [0.9, 1.1], atol=1e-6)

    def test_unknown_optimizer(self):
        with pytest.raises(ConfigError):
            make_optimizer("lbfgs", 0.1)


class TestOptimize:
    """Tests for the training loop."""

    def test_converges(self):
        trace = optimize(_quadratic([1.0, -2.0]), np.zeros(2), 0.1, 500, cost_threshold=1e-20)
        assert trace.stop_reason == "converged"
        assert np.allclose(trace.final_params, [1.0, -2.0], atol=1e-9)
        assert trace.records[0].epoch == 0

    def test_epoch_cap(self):
        trace = optimize(_quadratic([1.0]), np.zeros(1), 0.01, 5)
        assert trace.stop_reason == "epoch cap"
        assert trace.epochs == 5
        assert len(trace.records) == 6

    def test_already_converged(self):
        trace = optimize(_quadratic([0.0]), np.zeros(1), 0.1, 50, cost_threshold=1e-12)
        assert trace.epochs == 0
        assert trace.stop_reason == "converged"

    def test_monitor_schedule(self):
        calls = []

        def monitor(epoch, params):
            calls.append(epoch)
            return {"trace_distance": float(abs(params[0] - 1.0))}

        optimize(_quadratic([1.0]), np.zeros(1), 0.01, 7, monitor=monitor, monitor_every=3)
        assert calls == [0, 3, 6, 7]

    def test_adam_converges(self):
        trace = optimize(_quadratic([0.3, -0.2]), np.zeros(2), 0.01, 3000, optimizer="adam")
        assert trace.final_cost < 1e-4

    def test_divergence(self):
        with pytest.raises(DivergenceError):
            optimize(_quadratic([0.0]), np.ones(1), 10.0, 20)

    def test_non_finite_cost(self):
        with pytest.raises(DivergenceError):
            optimize(lambda x: (float("nan"), np.zeros(1)), np.zeros(1), 0.1, 3)

    def test_bad_learning_rate(self):
        with pytest.raises(ConfigError):
            optimize(_quadratic([0.0]), np.ones(1), 0.0, 3)
