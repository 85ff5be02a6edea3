"""
Test State Learning - Ansatz, cost, gradients and persistence
"""

import math

import numpy as np
import pytest

from hamlearn.config import StateLearnConfig
from hamlearn.dataset import (coherence_observables, generate_state_learning_data,
                              select_coherence_observables)
from hamlearn.errors import DatasetError, DimensionError
from hamlearn.oracle import circuit_unitary, density_trace_distance
from hamlearn.pauli import PauliObservable
from hamlearn.simulator import Gate, StateVector, random_state
from hamlearn.state_learn import (Ansatz, StateLearner, cost_state, export_state, load_state,
                                  prepare_state, random_beta, random_hamiltonians,
                                  realizable_target, state_validation_error, trace_distance_states,
                                  train_state, train_state_with_restarts)


def _problem(n=2, layers=1, n_hams=2, n_t=3, seed=0):
    ansatz = Ansatz(n, layers)
    target = realizable_target(ansatz, seed)
    hams = random_hamiltonians(n_hams, n, seed)
    data = generate_state_learning_data(target, hams, coherence_observables(n), n_t, 0.1)
    return ansatz, target, data


class TestAnsatz:
    """Tests for the Ry + CNOT-ladder ansatz."""

    def test_param_count(self):
        assert Ansatz(3, 2).num_params == 9
        assert Ansatz.default(4).num_layers == 4

    def test_zero_angles(self):
        state = prepare_state(Ansatz(3, 2), np.zeros(9))
        assert np.allclose(state.amplitudes, StateVector.basis(3).amplitudes)

    def test_single_qubit_rotation(self):
        theta = 0.9
        state = prepare_state(Ansatz(1, 0), [theta])
        assert np.allclose(state.amplitudes, [math.cos(theta / 2), math.sin(theta / 2)])

    def test_matches_dense_circuit(self):
        ansatz = Ansatz(3, 2)
        beta = random_beta(ansatz, 4)
        expected = circuit_unitary(ansatz.circuit(beta))[:, 0]
        assert np.allclose(prepare_state(ansatz, beta).amplitudes, expected, atol=1e-12)

    def test_real_amplitudes(self):
        ansatz = Ansatz(4, 3)
        for restart in range(5):
            state = prepare_state(ansatz, random_beta(ansatz, 0, restart))
            assert state.is_real
            assert abs(state.norm - 1.0) < 1e-12

    def test_complex_gate_rejected(self):
        class PhasedAnsatz(Ansatz):
            def circuit(self, beta):
                return super().circuit(beta).extended([Gate("RX", (0,), 0.3)])

        with pytest.raises(ValueError, match="complex amplitudes"):
            prepare_state(PhasedAnsatz(2, 1), np.full(4, 0.4))

    def test_wrong_length(self):
        with pytest.raises(DimensionError):
            Ansatz(2, 1).circuit([0.1, 0.2, 0.3])


class TestStateDistance:
    """Tests for trace_distance_states."""

    def test_identical(self):
        s = random_state(3, 1)
        assert trace_distance_states(s, s) < 1e-7

    def test_orthogonal(self):
        assert trace_distance_states(StateVector.from_bits("01"), StateVector.from_bits("10")) == pytest.approx(1.0)

    def test_global_phase_invisible(self):
        s = random_state(2, 2)
        phased = StateVector(s.amplitudes * np.exp(0.7j), 2)
        assert trace_distance_states(s, phased) < 1e-7

    def test_matches_density_form(self):
        for seed in range(5):
            a, b = random_state(3, seed), random_state(3, seed + 50)
            assert abs(trace_distance_states(a, b) - density_trace_distance(a, b)) < 1e-10


class TestCostAndGradient:
    """Tests for StateLearner."""

    def test_zero_at_target(self):
        ansatz = Ansatz(2, 1)
        beta = random_beta(ansatz, 7)
        target = prepare_state(ansatz, beta)
        data = generate_state_learning_data(target, random_hamiltonians(2, 2, 1),
                                            coherence_observables(2), 3, 0.1)
        assert cost_state(beta, ansatz, data) < 1e-20

    def test_gradient_matches_finite_difference(self):
        ansatz, _, data = _problem(n=3, layers=2, n_hams=2, n_t=2, seed=3)
        learner = StateLearner(ansatz, data)
        for restart in range(3):
            beta = random_beta(ansatz, 11, restart)
            value, shift = learner.value_and_grad(beta)
            _, fd = learner.value_and_grad(beta, "finite-difference")
            assert value == pytest.approx(learner.cost(beta), rel=1e-12)
            assert np.allclose(shift, fd, rtol=1e-5, atol=1e-8)

    def test_unknown_method(self):
        ansatz, _, data = _problem()
        with pytest.raises(ValueError):
            StateLearner(ansatz, data).value_and_grad(np.zeros(ansatz.num_params), "adjoint")

    def test_complex_target_rejected(self):
        target = random_state(2, 5)
        data = generate_state_learning_data(target, random_hamiltonians(1, 2, 0),
                                            coherence_observables(2), 2, 0.1)
        with pytest.raises(DatasetError):
            StateLearner(Ansatz(2, 1), data)

    def test_size_mismatch(self):
        _, _, data = _problem(n=2)
        with pytest.raises(DatasetError):
            StateLearner(Ansatz(3, 1), data)


class TestTraining:
    """Tests for train_state."""

    def test_cost_decreases(self):
        ansatz, target, data = _problem(n=2, layers=1, seed=2)
        config = StateLearnConfig(learning_rate=0.002, max_epochs=20, restarts=1)
        trace = train_state(config, data, ansatz, target=target)
        assert trace.final_cost < trace.initial_cost
        assert trace.final_trace_distance is not None
        assert trace.metadata["ansatz"] == {"num_qubits": 2, "num_layers": 1}

    def test_restarts_recorded(self):
        ansatz, target, data = _problem(n=2, layers=1, seed=2)
        config = StateLearnConfig(learning_rate=0.01, max_epochs=3, restarts=2)
        trace = train_state_with_restarts(config, data, ansatz, target)
        assert len(trace.metadata["restart_costs"]) == 2

    def test_validation_error_zero_for_target(self):
        _, target, data = _problem(n=2, seed=4)
        obs = PauliObservable.from_label("XM", 2)
        assert state_validation_error(target, target, data.hamiltonians[0], obs, 5, 0.1) < 1e-24


class TestPersistence:
    """Tests for export_state / load_state."""

    def test_reload(self, tmp_path):
        ansatz = Ansatz(3, 1)
        beta = random_beta(ansatz, 2)
        path = str(tmp_path / "state.json")
        export_state(path, ansatz, beta, {"seed": 2})
        loaded_ansatz, loaded_beta, state = load_state(path)
        assert loaded_ansatz == ansatz
        assert np.array_equal(loaded_beta, beta)
        assert np.allclose(state.amplitudes, prepare_state(ansatz, beta).amplitudes)

    def test_malformed(self, tmp_path):
        path = tmp_path / "state.json"
        path.write_text('{"num_qubits": 2}')
        with pytest.raises(DatasetError):
            load_state(str(path))


@pytest.mark.slow
class TestRecoveryRuns:
    """Full recovery of a realizable two-qubit state."""

    def test_two_qubit_recovery(self):
        ansatz = Ansatz.default(2)
        target = realizable_target(ansatz, 1)
        hams = random_hamiltonians(4, 2, 0)
        data = generate_state_learning_data(target, hams, coherence_observables(2), 5, 0.1)
        config = StateLearnConfig(learning_rate=0.02, max_epochs=3000, cost_threshold=1e-14, restarts=3)
        trace = train_state_with_restarts(config, data, ansatz, target)
        assert trace.final_cost < 1e-8
        assert trace.final_trace_distance < 1e-3


@pytest.mark.slow
class TestDatasetSizeRuns:
    """How dataset size changes the recovered three-qubit state, averaged over seeds."""

    @staticmethod
    def _mean_trace_distance(n_hams, n_obs, n_t):
        distances = []
        for seed in range(3):
            ansatz = Ansatz(3, 2)
            target = realizable_target(ansatz, seed)
            data = generate_state_learning_data(target, random_hamiltonians(n_hams, 3, seed),
                                                select_coherence_observables(3, n_obs, seed), n_t, 0.1)
            config = StateLearnConfig(learning_rate=0.02, max_epochs=800, cost_threshold=1e-14,
                                      restarts=2, seed=seed)
            distances.append(train_state_with_restarts(config, data, ansatz, target).final_trace_distance)
        return float(np.mean(distances))

    def test_more_timesteps_lower_trace_distance(self):
        assert self._mean_trace_distance(2, 4, 6) <= self._mean_trace_distance(2, 4, 1)

    def test_more_hamiltonians_help_short_series(self):
        """With a single time step, extra Hamiltonians add the missing information."""
        assert self._mean_trace_distance(4, 4, 1) <= self._mean_trace_distance(1, 4, 1)

    def test_fewer_observables_longer_series(self):
        """Four observables over eight steps do about as well as sixteen over two."""
        few_long = self._mean_trace_distance(2, 4, 8)
        many_short = self._mean_trace_distance(2, 16, 2)
        assert few_long <= many_short + 0.05
