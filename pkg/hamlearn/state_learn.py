"""
State Learning - Variational recovery of an unknown real-amplitude state

Cost: sum over (alpha, i, k) of (<psi(beta)| U_i(k dt)^dagger O_alpha U_i(k dt) |psi(beta)> - record)^2
with U_i the exact propagators of known Hamiltonians and psi(beta) prepared by
a layered Ry + CNOT-ladder ansatz.
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass
import json
import logging
import math

import numpy as np

from .config import StateLearnConfig
from .dataset import TimeSeriesDataset, predict_series
from .errors import ArtifactIOError, DatasetError, DimensionError, DivergenceError
from .optim import optimize
from .pauli import ExactPropagator, ParamHamiltonian, PauliObservable, build_family
from .seeding import make_rng
from .simulator import Circuit, Gate, StateVector, run_gates
from .training_trace import TrainingTrace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Ansatz:
    """
    Layered hardware-efficient ansatz V(beta).

    Each layer applies Ry(beta) on every qubit followed by a CNOT ladder
    (q -> q + 1); a final Ry layer closes the circuit.

    Attributes:
        num_qubits: Register size
        num_layers: Number of Ry + ladder blocks
    """
    num_qubits: int
    num_layers: int

    def __post_init__(self):
        if self.num_qubits < 1:
            raise DimensionError(f"num_qubits must be >= 1, got {self.num_qubits}")
        if self.num_layers < 0:
            raise ValueError(f"num_layers must be >= 0, got {self.num_layers}")

    @classmethod
    def default(cls, num_qubits: int) -> "Ansatz":
        """Depth growing linearly with the register."""
        return cls(num_qubits, num_qubits)

    @property
    def num_params(self) -> int:
        return self.num_qubits * (self.num_layers + 1)

    def circuit(self, beta: Sequence[float]) -> Circuit:
        beta = np.asarray(beta, dtype=float).reshape(-1)
        if beta.size != self.num_params:
            raise DimensionError(f"Ansatz takes {self.num_params} parameters, got {beta.size}")
        n = self.num_qubits
        gates: List[Gate] = []
        for layer in range(self.num_layers):
            gates += [Gate("RY", (q,), beta[layer * n + q]) for q in range(n)]
            gates += [Gate("CNOT", (q, q + 1)) for q in range(n - 1)]
        gates += [Gate("RY", (q,), beta[self.num_layers * n + q]) for q in range(n)]
        return Circuit(n, tuple(gates))

    def to_dict(self) -> Dict[str, int]:
        return {"num_qubits": self.num_qubits, "num_layers": self.num_layers}


def prepare_state(ansatz: Ansatz, beta: Sequence[float]) -> StateVector:
    """V(beta)|0...0>, a normalized real-amplitude state."""
    circuit = ansatz.circuit(beta)
    zero = np.zeros(2 ** ansatz.num_qubits, dtype=complex)
    zero[0] = 1.0
    amps = run_gates(zero, circuit.gates, ansatz.num_qubits)
    if np.max(np.abs(amps.imag)) > 1e-12:
        raise ValueError("Ansatz circuit produced complex amplitudes; only real gates are allowed")
    return StateVector(amps.real.astype(complex), ansatz.num_qubits)


def random_beta(ansatz: Ansatz, seed: int, restart: int = 0) -> np.ndarray:
    return make_rng(seed, "beta", restart).uniform(-math.pi, math.pi, size=ansatz.num_params)


def realizable_target(ansatz: Ansatz, seed: int) -> StateVector:
    """A target state the ansatz can represent exactly."""
    return prepare_state(ansatz, make_rng(seed, "target").uniform(-math.pi, math.pi, ansatz.num_params))


def random_hamiltonians(count: int, num_qubits: int, seed: int,
                        family: str = "generic-2local") -> List[ParamHamiltonian]:
    """count seeded random Hamiltonians with uniform [-1, 1] coefficients."""
    return [build_family(family, num_qubits, seed=int(make_rng(seed, "hamiltonians", i).integers(2 ** 62)))
            for i in range(count)]


def trace_distance_states(a: StateVector, b: StateVector) -> float:
    """Pure-state trace distance sqrt(1 - |<a|b>|^2)."""
    if a.dim != b.dim:
        raise DimensionError(f"States of dimension {a.dim} and {b.dim}")
    return float(math.sqrt(max(0.0, 1.0 - abs(a.overlap(b)) ** 2)))


def check_real_target(state: StateVector) -> None:
    if not state.is_real:
        raise DatasetError("The Ry ansatz only reaches real-amplitude states; complex target rejected")


class StateLearner:
    """
    Cost and gradient of the state-learning problem.

    Propagators U_i(k dt) are precomputed once; observables are held as a
    dense stack so all expectations of one evolved state cost one contraction.
    """

    def __init__(self, ansatz: Ansatz, dataset: TimeSeriesDataset):
        if dataset.mode != "state":
            raise DatasetError(f"State learning needs a state-mode dataset, got {dataset.mode}")
        if dataset.num_sites != ansatz.num_qubits:
            raise DatasetError(f"Dataset on {dataset.num_sites} qubits, ansatz on {ansatz.num_qubits}")
        if "state" in dataset.generator_info:
            check_real_target(StateVector.from_dict(dataset.generator_info["state"]))
        self.ansatz = ansatz
        self.dataset = dataset
        self._records = dataset.values
        self._observables = np.stack([o.matrix() for o in dataset.observables])
        self._propagators = []
        for ham in dataset.hamiltonians:
            prop = ExactPropagator(ham)
            self._propagators.append([prop.unitary(k * dataset.dt)
                                      for k in range(1, dataset.n_timesteps + 1)])

    @property
    def num_params(self) -> int:
        return self.ansatz.num_params

    def predictions(self, beta: Sequence[float]) -> np.ndarray:
        """Expectations with the (alpha, i, k - 1) layout of the records."""
        psi = prepare_state(self.ansatz, beta).amplitudes
        out = np.empty(self._records.shape)
        for i, unitaries in enumerate(self._propagators):
            for k, u in enumerate(unitaries):
                phi = u @ psi
                out[:, i, k] = np.real(np.einsum("d,ade,e->a", phi.conj(), self._observables, phi))
        return out

    def cost(self, beta: Sequence[float]) -> float:
        return float(np.sum((self.predictions(beta) - self._records) ** 2))

    def value_and_grad(self, beta: Sequence[float],
                       method: str = "parameter-shift") -> Tuple[float, np.ndarray]:
        """
        Cost and dCost/dbeta.

        Every beta_j drives exactly one Ry gate, so the shift rule is applied
        to the whole expectation table at beta_j +/- pi/2.
        """
        beta = np.asarray(beta, dtype=float).reshape(-1)
        resid = self.predictions(beta) - self._records
        value = float(np.sum(resid ** 2))
        grad = np.zeros(beta.size)
        if method == "parameter-shift":
            for j in range(beta.size):
                shift = np.zeros(beta.size)
                shift[j] = math.pi / 2
                d_exp = 0.5 * (self.predictions(beta + shift) - self.predictions(beta - shift))
                grad[j] = float(np.sum(2.0 * resid * d_exp))
        elif method == "finite-difference":
            step = 1e-5
            for j in range(beta.size):
                shift = np.zeros(beta.size)
                shift[j] = step
                grad[j] = (self.cost(beta + shift) - self.cost(beta - shift)) / (2 * step)
        else:
            raise ValueError(f"Unknown gradient method {method!r}")
        return value, grad


def cost_state(beta: Sequence[float], ansatz: Ansatz, dataset: TimeSeriesDataset) -> float:
    return StateLearner(ansatz, dataset).cost(beta)


def train_state(
    config: StateLearnConfig,
    dataset: TimeSeriesDataset,
    ansatz: Ansatz,
    beta0: Optional[Sequence[float]] = None,
    target: Optional[StateVector] = None,
) -> TrainingTrace:
    """
    Gradient-descent training of the ansatz parameters.

    Args:
        config: Optimizer settings
        dataset: State-mode records
        ansatz: Ansatz shape
        beta0: Starting parameters (seeded uniform in [-pi, pi] when omitted)
        target: True state, enabling the trace-distance column

    Returns:
        TrainingTrace; final_params holds the learned beta
    """
    learner = StateLearner(ansatz, dataset)
    x0 = np.asarray(beta0, dtype=float) if beta0 is not None else random_beta(ansatz, config.seed)

    def monitor(epoch: int, beta: np.ndarray) -> Dict[str, Optional[float]]:
        return {"trace_distance": trace_distance_states(target, prepare_state(ansatz, beta))}

    trace = TrainingTrace(config.snapshot_every)
    trace.metadata = {"learner": "state", "ansatz": ansatz.to_dict(),
                      "gradient_method": config.gradient_method}
    optimize(
        lambda b: learner.value_and_grad(b, config.gradient_method),
        x0,
        config.learning_rate,
        config.max_epochs,
        config.cost_threshold,
        config.lr_decay,
        config.optimizer,
        monitor=monitor if target is not None else None,
        trace=trace,
        log_every=config.snapshot_every,
        name="learn-state",
    )
    return trace


def train_state_with_restarts(
    config: StateLearnConfig,
    dataset: TimeSeriesDataset,
    ansatz: Ansatz,
    target: Optional[StateVector] = None,
) -> TrainingTrace:
    """Best of config.restarts seeded runs by final cost."""
    best: Optional[TrainingTrace] = None
    costs: List[Optional[float]] = []
    last_error: Optional[DivergenceError] = None
    for restart in range(config.restarts):
        try:
            trace = train_state(config, dataset, ansatz, random_beta(ansatz, config.seed, restart), target)
        except DivergenceError as e:
            logger.warning("Restart %d diverged: %s", restart, e)
            costs.append(None)
            last_error = e
            continue
        costs.append(trace.final_cost)
        trace.metadata["restart"] = restart
        if best is None or trace.final_cost < best.final_cost:
            best = trace
    if best is None:
        raise last_error
    best.metadata["restart_costs"] = costs
    return best


def state_validation_error(learned: StateVector, target: StateVector, hamiltonian: ParamHamiltonian,
                           observable: PauliObservable, n_timesteps: int, dt: float) -> float:
    """Mean squared deviation of a held-out observable's series under a known Hamiltonian."""
    truth = predict_series(hamiltonian, target, observable, n_timesteps, dt)
    model = predict_series(hamiltonian, learned, observable, n_timesteps, dt)
    return float(np.mean((model - truth) ** 2))


def export_state(path: str, ansatz: Ansatz, beta: Sequence[float],
                 config: Optional[Dict[str, Any]] = None) -> None:
    """Write {num_qubits, num_layers, beta, amplitudes} as JSON."""
    state = prepare_state(ansatz, beta)
    doc: Dict[str, Any] = {
        "num_qubits": ansatz.num_qubits,
        "num_layers": ansatz.num_layers,
        "beta": [float(b) for b in beta],
        "amplitudes": [float(a.real) for a in state.amplitudes],
    }
    if config is not None:
        doc["config"] = config
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
    except OSError as e:
        raise ArtifactIOError(f"Cannot write learned state {path}: {e}") from e


def load_state(path: str) -> Tuple[Ansatz, np.ndarray, StateVector]:
    """Read a learned-state file and rebuild the state from beta."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
        ansatz = Ansatz(int(doc["num_qubits"]), int(doc["num_layers"]))
        beta = np.asarray(doc["beta"], dtype=float)
    except OSError as e:
        raise ArtifactIOError(f"Cannot read learned state {path}: {e}") from e
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"Malformed learned-state file {path}: {e}") from e
    return ansatz, beta, prepare_state(ansatz, beta)
