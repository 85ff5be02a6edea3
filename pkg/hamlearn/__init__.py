"""
hamlearn - Variational Hamiltonian and state learning from observable time series

A statevector simulator, Trotter circuit synthesis and gradient-descent
learners that recover Pauli-basis Hamiltonian coefficients (or the
parameters of a state-preparation ansatz) from time-series expectation
values, plus a qutrit SU(3) learner with nested-commutator gradients.
"""

from .config import ExperimentConfig, LearnConfig, StateLearnConfig, Su3LearnConfig
from .dataset import (
    TimeSeriesDataset,
    coherence_observables,
    generate_ham_learning_data,
    generate_state_learning_data,
    select_correlators,
)
from .errors import (
    ArtifactIOError,
    ConfigError,
    DatasetError,
    DimensionError,
    DivergenceError,
    HamLearnError,
)
from .experiment import ExperimentResult, ExperimentRunner
from .ham_learn import (
    HamiltonianLearner,
    phase_minimized_trace_distance,
    trace_distance_hamiltonians,
    train,
    train_with_restarts,
    validation_error,
)
from .pauli import ParamHamiltonian, PauliObservable, PauliString, build_family, exact_evolution
from .simulator import (Circuit, Gate, StateVector, apply_circuit, apply_gate, expectation, random_state,
                        random_states)
from .state_learn import Ansatz, prepare_state, trace_distance_states, train_state
from .su3 import bch_conjugation, bch_gradient, learn_su3, structure_constants, su3_cost_gradient
from .training_trace import TrainingTrace
from .trotter import TrotterPlan, build_plan, evolve, splitting_error

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "LearnConfig",
    "StateLearnConfig",
    "Su3LearnConfig",
    "TimeSeriesDataset",
    "coherence_observables",
    "generate_ham_learning_data",
    "generate_state_learning_data",
    "select_correlators",
    "ArtifactIOError",
    "ConfigError",
    "DatasetError",
    "DimensionError",
    "DivergenceError",
    "HamLearnError",
    "ExperimentResult",
    "ExperimentRunner",
    "HamiltonianLearner",
    "phase_minimized_trace_distance",
    "trace_distance_hamiltonians",
    "train",
    "train_with_restarts",
    "validation_error",
    "ParamHamiltonian",
    "PauliObservable",
    "PauliString",
    "build_family",
    "exact_evolution",
    "Circuit",
    "Gate",
    "StateVector",
    "apply_circuit",
    "apply_gate",
    "expectation",
    "random_state",
    "random_states",
    "Ansatz",
    "prepare_state",
    "trace_distance_states",
    "train_state",
    "bch_conjugation",
    "bch_gradient",
    "learn_su3",
    "structure_constants",
    "su3_cost_gradient",
    "TrainingTrace",
    "TrotterPlan",
    "build_plan",
    "evolve",
    "splitting_error",
]
