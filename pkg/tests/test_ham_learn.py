"""
Test Hamiltonian Learning - Cost, gradients, diagnostics and training
"""

import logging
import math

import numpy as np
import pytest

from hamlearn.config import LearnConfig
from hamlearn.dataset import (generate_ham_learning_data, make_heldout_dataset,
                              select_correlators)
from hamlearn.errors import DatasetError, DimensionError
from hamlearn.ham_learn import (HamiltonianLearner, cost, gradient, heldout_series,
                                initial_params, phase_minimized_trace_distance,
                                trace_distance_hamiltonians, train, train_with_restarts,
                                validation_error, validation_errors)
from hamlearn.oracle import taylor_expm
from hamlearn.pauli import ParamHamiltonian, PauliObservable, build_family, dense_matrix
from hamlearn.seeding import make_rng
from hamlearn.simulator import StateVector, random_states


def _problem(family, n, seed, n_states=2, n_obs=1, n_t=2):
    truth = build_family(family, n, seed=seed)
    states = random_states(n_states, n, seed=seed + 100)
    data = generate_ham_learning_data(truth, states, select_correlators(n, n_obs, seed), n_t, 0.1)
    return truth, data


def _self_consistent(truth, data, steps_per_dt=4):
    """Dataset whose records are the Trotter model's own predictions at the truth."""
    learner = HamiltonianLearner(truth, data, steps_per_dt)
    return data.with_values(learner.predictions(truth.coeffs))


class TestCost:
    """Tests for the squared-error cost."""

    def test_self_consistent_zero(self, zz_xx3, states3):
        data = generate_ham_learning_data(zz_xx3, states3, select_correlators(3, 1, 0), 3, 0.1)
        data = _self_consistent(zz_xx3, data)
        assert cost(zz_xx3.coeffs, zz_xx3, data) == 0.0

    def test_fine_trotter_near_exact(self, zz_xx3, states3):
        data = generate_ham_learning_data(zz_xx3, states3, select_correlators(3, 1, 0), 2, 0.1)
        assert cost(zz_xx3.coeffs, zz_xx3, data, steps_per_dt=32) < 1e-10

    def test_one_dimensional_scan(self):
        """c ZZ on |++>, observable XI, one step: cost = (cos 0.2c - cos 0.2c*)^2."""
        c_true = 0.6
        truth = ParamHamiltonian(("ZZ",), [c_true])
        plus = StateVector.from_amplitudes([0.5, 0.5, 0.5, 0.5])
        data = generate_ham_learning_data(truth, [plus], [PauliObservable.from_label("XI", 2)], 1, 0.1)
        grid = np.linspace(0.0, 1.0, 21)
        values = [cost([c], truth, data) for c in grid]
        expected = [(math.cos(0.2 * c) - math.cos(0.2 * c_true)) ** 2 for c in grid]
        assert np.allclose(values, expected, atol=1e-12)
        assert grid[int(np.argmin(values))] == pytest.approx(c_true)

    def test_param_length_checked(self, zz_xx3, states3):
        data = generate_ham_learning_data(zz_xx3, states3, select_correlators(3, 1, 0), 1, 0.1)
        with pytest.raises(DimensionError):
            cost([0.1, 0.2], zz_xx3, data)

    def test_family_mismatch(self, zz_xx3, states3):
        data = generate_ham_learning_data(zz_xx3, states3, select_correlators(3, 1, 0), 1, 0.1)
        with pytest.raises(DatasetError):
            HamiltonianLearner(build_family("zz-xx", 4, seed=0), data)


class TestGradient:
    """Gradient methods against each other and finite differences."""

    @pytest.mark.parametrize("family,n", [("zz-xx", 2), ("zz-xx", 3), ("tfim-inhomogeneous", 3),
                                          ("tfim-homogeneous", 4), ("heisenberg-xyz", 3)])
    def test_methods_agree(self, family, n):
        for trial in range(10):
            truth, data = _problem(family, n, seed=10 * trial + n, n_obs=1, n_t=2)
            learner = HamiltonianLearner(truth, data)
            params = make_rng(trial, "grad-test", family).uniform(-1, 1, truth.num_params)
            shift = learner.gradient(params, "parameter-shift")
            analytic = learner.gradient(params, "analytic-shift")
            fd = learner.gradient(params, "finite-difference")
            assert np.allclose(shift, analytic, rtol=1e-10, atol=1e-12)
            assert np.allclose(fd, shift, rtol=1e-5, atol=1e-8)

    def test_value_matches_cost(self, zz_xx3, states3):
        data = generate_ham_learning_data(zz_xx3, states3, select_correlators(3, 1, 0), 2, 0.1)
        learner = HamiltonianLearner(zz_xx3, data)
        params = initial_params(zz_xx3.num_params, 3)
        for method in ("parameter-shift", "analytic-shift", "finite-difference"):
            assert learner.value_and_grad(params, method)[0] == pytest.approx(learner.cost(params), rel=1e-12)

    def test_zero_at_truth(self, zz_xx3, states3):
        data = generate_ham_learning_data(zz_xx3, states3, select_correlators(3, 2, 0), 3, 0.1)
        data = _self_consistent(zz_xx3, data)
        assert np.max(np.abs(gradient(zz_xx3.coeffs, zz_xx3, data))) < 1e-8

    def test_identity_observable(self, zz_xx3, states3):
        ident = PauliObservable.from_string("III")
        data = generate_ham_learning_data(zz_xx3, states3, [ident], 2, 0.1)
        params = initial_params(zz_xx3.num_params, 0)
        for method in ("parameter-shift", "analytic-shift"):
            assert np.max(np.abs(gradient(params, zz_xx3, data, method))) < 1e-12

    def test_threads_reproducible(self, zz_xx3):
        states = random_states(4, 3, seed=5)
        data = generate_ham_learning_data(zz_xx3, states, select_correlators(3, 1, 0), 2, 0.1)
        params = initial_params(zz_xx3.num_params, 1)
        serial = HamiltonianLearner(zz_xx3, data).value_and_grad(params)
        threaded = HamiltonianLearner(zz_xx3, data, workers=3).value_and_grad(params)
        assert serial[0] == threaded[0]
        assert np.array_equal(serial[1], threaded[1])

    def test_unknown_method(self, zz_xx3, states3):
        data = generate_ham_learning_data(zz_xx3, states3, select_correlators(3, 1, 0), 1, 0.1)
        with pytest.raises(ValueError):
            HamiltonianLearner(zz_xx3, data).gradient(zz_xx3.coeffs, "adjoint")


class TestDistances:
    """Tests for Hamiltonian trace distances."""

    def test_identical(self, zz_xx3):
        assert trace_distance_hamiltonians(zz_xx3, zz_xx3, 1.0) < 1e-12

    def test_zero_time(self, zz_xx3):
        other = build_family("zz-xx", 3, seed=99)
        assert trace_distance_hamiltonians(zz_xx3, other, 0.0) < 1e-12

    def test_matches_oracle(self, zz_xx3):
        other = build_family("zz-xx", 3, seed=99)
        w = taylor_expm(1j * dense_matrix(zz_xx3)) @ taylor_expm(-1j * dense_matrix(other))
        expected = np.linalg.norm(w - np.eye(8)) / math.sqrt(8)
        assert abs(trace_distance_hamiltonians(zz_xx3, other, 1.0) - expected) < 1e-10

    def test_global_phase(self):
        h = ParamHamiltonian(("ZZ", "XI"), [0.4, 0.3])
        shifted = ParamHamiltonian(("ZZ", "XI", "II"), [0.4, 0.3, 0.5])
        assert trace_distance_hamiltonians(h, shifted, 1.0) == pytest.approx(2 * math.sin(0.25), abs=1e-12)
        assert phase_minimized_trace_distance(h, shifted, 1.0) < 1e-6

    def test_size_mismatch(self, zz_xx3):
        with pytest.raises(DimensionError):
            trace_distance_hamiltonians(zz_xx3, build_family("zz-xx", 2, seed=0), 1.0)


class TestValidation:
    """Tests for held-out validation error."""

    def test_exact_model(self, zz_xx3):
        held = make_heldout_dataset(zz_xx3, ["ZM", "XXX"], 2, 5, 0.1, seed=1)
        assert validation_error(zz_xx3, held) < 1e-20
        assert all(e < 1e-20 for e in validation_errors(zz_xx3, held).values())

    def test_quadratic_onset(self, zz_xx3):
        held = make_heldout_dataset(zz_xx3, ["ZM"], 2, 10, 0.1, seed=1)

        def perturbed(eps):
            coeffs = zz_xx3.coeffs.copy()
            coeffs[0] += eps
            return validation_error(zz_xx3.with_coeffs(coeffs), held)

        ratio = perturbed(2e-3) / perturbed(1e-3)
        assert 3.5 < ratio < 4.5

    def test_overlap_warns(self, zz_xx3, caplog):
        held = make_heldout_dataset(zz_xx3, ["ZM"], 1, 2, 0.1, seed=1)
        with caplog.at_level(logging.WARNING):
            validation_errors(zz_xx3, held, training_labels=["ZM"])
        assert "also used for training" in caplog.text

    def test_heldout_series_rows(self, zz_xx3):
        held = make_heldout_dataset(zz_xx3, ["ZM"], 2, 3, 0.1, seed=1)
        rows = heldout_series(zz_xx3, zz_xx3, held, n_timesteps=6)
        assert len(rows) == 12
        assert rows[-1]["k"] == 6
        assert all(r["truth"] == pytest.approx(r["model"], abs=1e-12) for r in rows)


class TestTraining:
    """Tests for train and train_with_restarts."""

    def _one_param_problem(self):
        truth = ParamHamiltonian(("XI", "IX"), [0.7], groups=(0, 0))
        data = generate_ham_learning_data(truth, [StateVector.basis(2)],
                                          [PauliObservable.from_label("ZM", 2)], 5, 0.2)
        return truth, _self_consistent(truth, data)

    def test_one_parameter_recovery(self):
        truth, data = self._one_param_problem()
        config = LearnConfig(learning_rate=0.01, max_epochs=500, cost_threshold=1e-20, dt=0.2)
        trace = train(config, data, truth, init=[0.3], truth=truth)
        assert abs(trace.final_params[0] - 0.7) < 1e-4
        assert trace.final_trace_distance < 1e-3
        assert trace.metadata["plan"]["parameters"] == 1

    def test_cost_non_increasing(self):
        truth, data = self._one_param_problem()
        config = LearnConfig(learning_rate=0.005, max_epochs=60, cost_threshold=0.0, dt=0.2)
        costs = train(config, data, truth, init=[0.5]).costs
        assert np.all(np.diff(costs) <= 1e-12)

    def test_converged_stop(self):
        truth, data = self._one_param_problem()
        config = LearnConfig(learning_rate=0.01, max_epochs=2000, cost_threshold=1e-8, dt=0.2)
        trace = train(config, data, truth, init=[0.6])
        assert trace.stop_reason == "converged"
        assert trace.final_cost < 1e-8
        assert trace.epochs < 2000

    def test_validation_recorded(self):
        truth, data = self._one_param_problem()
        held = make_heldout_dataset(truth, ["XM"], 1, 3, 0.2, seed=0)
        config = LearnConfig(learning_rate=0.01, max_epochs=5, dt=0.2)
        trace = train(config, data, truth, init=[0.6], heldout=held, truth=truth)
        assert set(trace.final_validation) == {"XM"}
        assert trace.records[-1].validation_error is not None
        assert "phase_minimized_trace_distance" in trace.metadata

    def test_restarts_pick_best(self, zz_xx3, states3):
        data = generate_ham_learning_data(zz_xx3, states3, select_correlators(3, 1, 0), 2, 0.1)
        config = LearnConfig(learning_rate=0.02, max_epochs=3, restarts=3)
        trace = train_with_restarts(config, data, zz_xx3)
        costs = trace.metadata["restart_costs"]
        assert len(costs) == 3
        assert trace.final_cost == min(costs)


@pytest.mark.slow
class TestRecoveryRuns:
    """End-to-end recovery runs at the sizes of the published study."""

    def test_inhomogeneous_tfim(self):
        truth = build_family("tfim-inhomogeneous", 5, seed=3)
        states = random_states(8, 5, seed=4)
        data = generate_ham_learning_data(truth, states, select_correlators(5, 3, 0), 5, 0.1)
        data = _self_consistent(truth, data, steps_per_dt=4)
        held = make_heldout_dataset(truth, ["ZM"], 1, 5, 0.1, seed=5)
        config = LearnConfig(learning_rate=0.02, max_epochs=4000, cost_threshold=1e-16, restarts=3)
        trace = train_with_restarts(config, data, truth.with_coeffs(np.zeros(9)), held, truth)
        assert trace.final_validation_error < 1e-6
        learned = truth.with_coeffs(trace.final_params)
        three_point = make_heldout_dataset(truth, ["XXX", "ZZZ"], 1, 20, 0.1, seed=6)
        rows = heldout_series(learned, truth, three_point, 20)
        assert max(abs(r["truth"] - r["model"]) for r in rows) < 1e-2

    def test_homogeneous_tfim_ten_sites(self):
        truth = build_family("tfim-homogeneous", 10, coeffs=[0.5, 1.0])
        obs = [PauliObservable.from_label("XM", 10), PauliObservable.from_label("ZM", 10)]
        data = generate_ham_learning_data(truth, random_states(2, 10, seed=1), obs, 1, 0.1)
        data = _self_consistent(truth, data)
        held = make_heldout_dataset(truth, ["XM", "ZM"], 1, 5, 0.1, seed=2)
        config = LearnConfig(learning_rate=0.005, max_epochs=3000, cost_threshold=1e-18)
        trace = train(config, data, truth, init=[0.2, 0.6], heldout=held)
        assert np.max(np.abs(np.asarray(trace.final_params) - [0.5, 1.0])) < 1e-3
        assert trace.final_validation_error < 1e-6

    def test_small_dataset_overfits(self):
        """A single record can be fitted exactly without identifying the Hamiltonian."""
        truth = build_family("zz-xx", 3, seed=2)
        data = generate_ham_learning_data(truth, random_states(1, 3, seed=3),
                                          select_correlators(3, 1, 4)[:1], 1, 0.1)
        data = _self_consistent(truth, data)
        held = make_heldout_dataset(truth, ["ZM", "XM"], 2, 10, 0.1, seed=7)
        config = LearnConfig(learning_rate=0.05, max_epochs=3000, cost_threshold=1e-10)
        trace = train(config, data, truth, heldout=held)
        assert trace.final_cost < 1e-8
        assert trace.final_validation_error > 1e-3

    @staticmethod
    def _mean_trace_distance(n_states, n_obs, n_t):
        """Final trace distance to the truth averaged over five seeds."""
        config = LearnConfig(learning_rate=0.05, max_epochs=2000, cost_threshold=1e-14)
        distances = []
        for seed in range(5):
            truth = build_family("zz-xx", 3, seed=seed)
            data = generate_ham_learning_data(truth, random_states(n_states, 3, seed=seed + 50),
                                              select_correlators(3, n_obs, seed), n_t, 0.1)
            config.seed = seed
            distances.append(train(config, data, truth, truth=truth).final_trace_distance)
        return float(np.mean(distances))

    def test_more_states_lower_trace_distance(self):
        """Averaged over seeds, more initial states pin the Hamiltonian down better."""
        few, many = self._mean_trace_distance(1, 3, 5), self._mean_trace_distance(6, 3, 5)
        assert many <= few
        assert many < 0.05

    def test_more_timesteps_lower_trace_distance(self):
        assert self._mean_trace_distance(2, 1, 5) <= self._mean_trace_distance(2, 1, 1)

    def test_more_observables_lower_trace_distance(self):
        assert self._mean_trace_distance(2, 3, 2) <= self._mean_trace_distance(2, 1, 2)

    def test_large_dataset_generalizes(self):
        truth = build_family("zz-xx", 3, seed=2)
        data = generate_ham_learning_data(truth, random_states(6, 3, seed=3),
                                          select_correlators(3, 3, 4), 5, 0.1)
        data = _self_consistent(truth, data)
        held = make_heldout_dataset(truth, ["ZM", "XM"], 2, 10, 0.1, seed=7)
        config = LearnConfig(learning_rate=0.05, max_epochs=4000, cost_threshold=1e-14)
        trace = train(config, data, truth, heldout=held)
        assert trace.final_cost < 1e-6
        assert trace.final_validation_error < 1e-6
