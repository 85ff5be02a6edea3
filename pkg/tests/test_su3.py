"""
Test SU(3) - Algebra, nested-commutator series and qutrit learning
"""

import math

import numpy as np
import pytest

from hamlearn.config import Su3LearnConfig
from hamlearn.dataset import generate_ham_learning_data
from hamlearn.errors import ConfigError, DatasetError, DimensionError
from hamlearn.pauli import PauliObservable
from hamlearn.seeding import uniform_coeffs
from hamlearn.su3 import (GellMannObservable, QutritHamiltonian, bch_conjugation, bch_gradient,
                          commutator, decompose, exact_conjugation, exact_gradient, gell_mann,
                          generate_su3_data, learn_su3, random_qutrit_states, structure_constants,
                          su3_cost, su3_cost_gradient, su3_value_and_grad, unitary_distance)


def _dataset(n_states=4, n_obs=3, n_t=5, seed=0, scale=1.0, dt=0.1):
    coeffs = scale * uniform_coeffs(8, seed, "su3-test")
    states = random_qutrit_states(n_states, seed)
    obs = [GellMannObservable.from_index(j) for j in range(1, n_obs + 1)]
    return coeffs, generate_su3_data(coeffs, states, obs, n_t, dt)


class TestAlgebra:
    """Tests for Gell-Mann matrices and structure constants."""

    def test_trace_orthonormal(self):
        for a in range(1, 9):
            for b in range(1, 9):
                inner = np.trace(gell_mann(a) @ gell_mann(b))
                assert inner == pytest.approx(2.0 if a == b else 0.0, abs=1e-12)

    def test_known_constants(self):
        f = structure_constants()
        assert f.f(1, 2, 3) == pytest.approx(1.0)
        assert f.f(1, 4, 7) == pytest.approx(0.5)
        assert f.f(1, 5, 6) == pytest.approx(-0.5)
        assert f.f(4, 5, 8) == pytest.approx(math.sqrt(3) / 2)
        assert f.f(6, 7, 8) == pytest.approx(math.sqrt(3) / 2)

    def test_totally_antisymmetric(self):
        t = structure_constants().tensor
        assert np.allclose(t, -np.transpose(t, (1, 0, 2)))
        assert np.allclose(t, -np.transpose(t, (0, 2, 1)))

    def test_commutators_rebuilt(self):
        f = structure_constants()
        pairs = [(a, b) for a in range(1, 9) for b in range(a + 1, 9)]
        assert len(pairs) == 28
        for a, b in pairs:
            assert np.allclose(f.commutator(a, b), commutator(gell_mann(a), gell_mann(b)), atol=1e-12)

    def test_decompose_hermitian(self, rng):
        m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        m = m + m.conj().T
        g = decompose(m)
        rebuilt = sum(g[j] * gell_mann(j + 1) for j in range(9))
        assert np.allclose(rebuilt, m, atol=1e-12)

    def test_index_range(self):
        with pytest.raises(ValueError):
            gell_mann(10)

    def test_hamiltonian_needs_eight(self):
        with pytest.raises(DimensionError):
            QutritHamiltonian(np.ones(7))

    def test_non_finite_coefficients(self):
        with pytest.raises(ConfigError):
            QutritHamiltonian([0.1, math.inf, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])


class TestSeries:
    """Nested-commutator series against exact conjugation."""

    def test_time_zero(self):
        o = gell_mann(3)
        assert np.allclose(bch_conjugation(uniform_coeffs(8, 1), o, 0.0, 12), o)

    def test_high_order_matches_exact(self):
        for seed in range(5):
            c = uniform_coeffs(8, seed, "series")
            t = 0.9 / np.sum(np.abs(c))
            for j in (1, 3, 8):
                o = gell_mann(j)
                assert np.allclose(bch_conjugation(c, o, t, 40), exact_conjugation(c, o, t), atol=1e-12)

    def test_error_decreases_with_order(self):
        for seed in range(5):
            c = uniform_coeffs(8, seed, "convergence")
            t = 0.8 / np.sum(np.abs(c))
            o = gell_mann(seed + 2)
            exact = exact_conjugation(c, o, t)
            errors = [np.linalg.norm(bch_conjugation(c, o, t, order) - exact) for order in (2, 4, 8, 16)]
            assert all(later < earlier for earlier, later in zip(errors, errors[1:]))

    def test_first_order_gradient(self):
        c = uniform_coeffs(8, 2)
        o = gell_mann(5)
        t = 0.3
        for p in (1, 4, 8):
            expected = 1j * t * commutator(gell_mann(p), o)
            assert np.allclose(bch_gradient(c, o, t, 1, p), expected, atol=1e-14)

    def test_gradient_matches_exact(self):
        c = uniform_coeffs(8, 3)
        t = 0.8 / np.sum(np.abs(c))
        o = gell_mann(2)
        for p in range(1, 9):
            assert np.allclose(bch_gradient(c, o, t, 40, p), exact_gradient(c, o, t, p), atol=1e-11)

    def test_order_twelve_finite_difference(self):
        """Inside t ||c||_1 <= 0.5 the default order matches finite differences of exact dynamics."""
        h = 1e-6
        for seed in range(5):
            c = uniform_coeffs(8, seed, "order-12")
            t = 0.5 / np.sum(np.abs(c))
            o = gell_mann(seed + 1)
            for p in range(1, 9):
                step = np.zeros(8)
                step[p - 1] = h
                fd = (exact_conjugation(c + step, o, t) - exact_conjugation(c - step, o, t)) / (2 * h)
                assert np.allclose(bch_gradient(c, o, t, 12, p), fd, atol=1e-5)

    def test_exact_gradient_finite_difference(self):
        c = uniform_coeffs(8, 4)
        o = gell_mann(7)
        t, h = 1.5, 1e-6
        for p in range(1, 9):
            step = np.zeros(8)
            step[p - 1] = h
            fd = (exact_conjugation(c + step, o, t) - exact_conjugation(c - step, o, t)) / (2 * h)
            assert np.allclose(exact_gradient(c, o, t, p), fd, atol=1e-7)

    def test_invalid_arguments(self):
        c = uniform_coeffs(8, 0)
        with pytest.raises(ValueError):
            bch_conjugation(c, gell_mann(1), 0.1, -1)
        with pytest.raises(ValueError):
            bch_gradient(c, gell_mann(1), 0.1, 4, 9)


class TestCostAndLedger:
    """Tests for the qutrit cost, its gradient and the measurement ledger."""

    def test_zero_at_truth(self):
        coeffs, data = _dataset()
        assert su3_cost(coeffs, data) < 1e-20

    def test_value_matches_cost(self):
        _, data = _dataset(scale=0.3)
        c = uniform_coeffs(8, 9)
        value, _, _ = su3_value_and_grad(c, data)
        assert value == pytest.approx(su3_cost(c, data), rel=1e-6, abs=1e-10)

    @pytest.mark.parametrize("scale", [0.2, 1.0])
    def test_gradient_finite_difference(self, scale):
        _, data = _dataset(scale=scale)
        c = scale * uniform_coeffs(8, 5)
        grad, _ = su3_cost_gradient(c, data)
        h = 1e-6
        fd = np.zeros(8)
        for p in range(8):
            step = np.zeros(8)
            step[p] = h
            fd[p] = (su3_cost(c + step, data) - su3_cost(c - step, data)) / (2 * h)
        assert np.allclose(grad, fd, rtol=1e-5, atol=1e-6)

    @pytest.mark.parametrize("n_t", [1, 5, 20])
    def test_ledger_independent_of_timesteps(self, n_t):
        _, data = _dataset(n_states=4, n_obs=3, n_t=n_t)
        _, ledger = su3_cost_gradient(np.zeros(8), data)
        assert ledger.size == 108
        assert ledger.valid
        assert ledger.report()["primitive_measurements"] == 108

    def test_wrong_mode(self, zz_xx3, states3):
        data = generate_ham_learning_data(zz_xx3, states3, [PauliObservable.from_label("ZM", 3)], 1, 0.1)
        with pytest.raises(DatasetError):
            su3_cost(np.zeros(8), data)

    def test_unitary_distance(self):
        c = uniform_coeffs(8, 1)
        assert unitary_distance(c, c, 1.0) < 1e-12
        assert unitary_distance(c, np.zeros(8), 0.0) < 1e-12
        assert unitary_distance(c, -c, 1.0) > 0.1


class TestLearning:
    """Tests for learn_su3."""

    def test_short_run(self):
        coeffs, data = _dataset(n_states=3, n_obs=8, n_t=3)
        config = Su3LearnConfig(learning_rate=0.002, max_epochs=10)
        trace = learn_su3(config, data, truth=coeffs)
        assert trace.final_cost < trace.initial_cost
        assert trace.metadata["learner"] == "su3"
        assert trace.metadata["ledger"]["primitive_measurements"] == 9 * 8 * 3
        assert trace.final_trace_distance is not None


@pytest.mark.slow
class TestRecoveryRuns:
    """Recovery of all eight coefficients."""

    def test_recover_coefficients(self):
        coeffs, data = _dataset(n_states=6, n_obs=8, n_t=8)
        config = Su3LearnConfig(learning_rate=0.01, max_epochs=5000, cost_threshold=1e-20)
        trace = learn_su3(config, data, init=coeffs + 0.2 * uniform_coeffs(8, 7), truth=coeffs)
        assert np.max(np.abs(np.asarray(trace.final_params) - coeffs)) < 1e-3
