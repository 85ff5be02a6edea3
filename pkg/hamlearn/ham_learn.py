"""
Hamiltonian Learning - Variational recovery of Pauli coefficients

Cost: sum over (alpha, i, k) of (model expectation - record)^2, where the
model evolves each initial state through the Trotter circuit with gate
angles bound from the candidate coefficients.

Gradient methods:
- parameter-shift: every rotation occurrence is shifted by +/- pi/2 and the
  shifted expectations are differenced, then summed through the
  parameter-to-gate map
- analytic-shift: one reverse sweep per state using dG/dtheta = G(theta + pi) / 2,
  the same derivative evaluated for all occurrences at once
- finite-difference: central differences of the cost (debugging)
"""

from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
from concurrent.futures import ThreadPoolExecutor
import logging
import math

import numpy as np

from .config import LearnConfig
from .dataset import TimeSeriesDataset, predict_series
from .errors import DatasetError, DimensionError, DivergenceError
from .optim import optimize
from .pauli import ExactPropagator, ParamHamiltonian, _check_cap, exact_evolution
from .seeding import uniform_coeffs
from .simulator import apply_gate_array, expectation_array, run_gates
from .training_trace import TrainingTrace
from .trotter import TrotterPlan, build_plan

logger = logging.getLogger(__name__)

GRADIENT_METHODS = ("parameter-shift", "analytic-shift", "finite-difference")
FD_STEP = 1e-5


class HamiltonianLearner:
    """
    Cost and gradients of one (model family, dataset) pair.

    The Trotter plan is compiled once; every evaluation only re-binds angles.

    Attributes:
        model: Hamiltonian whose basis and grouping define the parameters
        dataset: Hamiltonian-mode dataset
        plan: Compiled Trotter plan for one time step
        workers: Threads used across initial states
    """

    def __init__(
        self,
        model: ParamHamiltonian,
        dataset: TimeSeriesDataset,
        steps_per_dt: int = 4,
        ordering: str = "alternating",
        cancel_gates: bool = True,
        workers: int = 1,
    ):
        if dataset.mode != "hamiltonian":
            raise DatasetError(f"Hamiltonian learning needs a hamiltonian-mode dataset, got {dataset.mode}")
        if dataset.num_sites != model.num_sites:
            raise DatasetError(
                f"Dataset on {dataset.num_sites} sites does not fit a {model.num_sites}-site model"
            )
        self.model = model
        self.dataset = dataset
        self.plan: TrotterPlan = build_plan(model, dataset.dt, steps_per_dt, ordering, cancel_gates)
        for gate, owner in zip(self.plan.base_circuit.gates, self.plan.slot_owner):
            if owner >= 0 and not gate.is_rotation:
                raise ValueError(f"Parameterized gate {gate.dump()} is not a Pauli rotation")
        self.workers = workers
        self._states = [s.amplitudes for s in dataset.initial_states]
        self._observables = dataset.observables
        self._records = dataset.values
        self._num_sites = model.num_sites

    @property
    def num_params(self) -> int:
        return self.model.num_params

    def _check(self, params: Sequence[float]) -> np.ndarray:
        params = np.asarray(params, dtype=float).reshape(-1)
        if params.size != self.num_params:
            raise DimensionError(f"Model takes {self.num_params} parameters, got {params.size}")
        return params

    def _map_states(self, fn: Callable[[int], Any]) -> List[Any]:
        """fn over initial-state indices; results come back in index order."""
        if self.workers == 1:
            return [fn(i) for i in range(len(self._states))]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, range(len(self._states))))

    def _expectations(self, amps: np.ndarray) -> np.ndarray:
        return np.array([expectation_array(amps, o) for o in self._observables])

    def _forward(self, gates, amps: np.ndarray) -> List[np.ndarray]:
        """States after k = 1..n_timesteps applications of the step circuit."""
        out = []
        for _ in range(self.dataset.n_timesteps):
            amps = run_gates(amps, gates, self._num_sites)
            out.append(amps)
        return out

    def predictions(self, params: Sequence[float]) -> np.ndarray:
        """Model expectations with the same (alpha, i, k - 1) layout as the records."""
        gates = self.plan.bind(self._check(params)).base_circuit.gates

        def one(i: int) -> np.ndarray:
            series = self._forward(gates, self._states[i])
            return np.stack([self._expectations(a) for a in series], axis=1)

        return np.stack(self._map_states(one), axis=1)

    def residuals(self, params: Sequence[float]) -> np.ndarray:
        return self.predictions(params) - self._records

    def cost(self, params: Sequence[float]) -> float:
        return float(np.sum(self.residuals(params) ** 2))

    # ------------------------------------------------------------------
    # Gradients
    # ------------------------------------------------------------------

    def _reduce(self, slot_grad: np.ndarray) -> np.ndarray:
        """Chain rule from gate angles to parameters."""
        grad = np.zeros(self.num_params)
        owners = np.asarray(self.plan.slot_owner)
        mask = owners >= 0
        np.add.at(grad, owners[mask], slot_grad[mask])
        return self.plan.angle_scale * grad

    def _weighted_expectation(self, amps: np.ndarray, weights: np.ndarray) -> float:
        return float(np.dot(weights, self._expectations(amps)))

    def _shift_state_grad(self, gates, i: int, weights: np.ndarray) -> np.ndarray:
        """Slot gradient for one initial state by the parameter-shift rule."""
        n_t = self.dataset.n_timesteps
        owners = self.plan.slot_owner
        slot_grad = np.zeros(len(gates))
        psi = self._states[i]
        for m in range(n_t):
            for s, gate in enumerate(gates):
                if owners[s] >= 0:
                    for sign in (1.0, -1.0):
                        phi = apply_gate_array(psi, gate.shifted(sign * math.pi / 2), self._num_sites)
                        phi = run_gates(phi, gates[s + 1:], self._num_sites)
                        total = self._weighted_expectation(phi, weights[:, m])
                        for k in range(m + 1, n_t):
                            phi = run_gates(phi, gates, self._num_sites)
                            total += self._weighted_expectation(phi, weights[:, k])
                        slot_grad[s] += 0.5 * sign * total
                psi = apply_gate_array(psi, gate, self._num_sites)
        return slot_grad

    def _adjoint_state_grad(self, gates, i: int, weights: np.ndarray,
                            series: List[np.ndarray]) -> np.ndarray:
        """Slot gradient for one initial state by a reverse sweep."""
        n_t = self.dataset.n_timesteps
        owners = self.plan.slot_owner
        inverses = [g.inverse() for g in gates]
        slot_grad = np.zeros(len(gates))

        def inject(k: int) -> np.ndarray:
            return sum(w * o.apply(series[k]) for w, o in zip(weights[:, k], self._observables))

        phi = series[-1]
        lam = inject(n_t - 1)
        for m in range(n_t - 1, -1, -1):
            for s in range(len(gates) - 1, -1, -1):
                before = apply_gate_array(phi, inverses[s], self._num_sites)
                if owners[s] >= 0:
                    turned = apply_gate_array(before, gates[s].shifted(math.pi), self._num_sites)
                    slot_grad[s] += float(np.real(np.vdot(lam, turned)))
                lam = apply_gate_array(lam, inverses[s], self._num_sites)
                phi = before
            if m > 0:
                lam = lam + inject(m - 1)
        return slot_grad

    def value_and_grad(self, params: Sequence[float],
                       method: str = "analytic-shift") -> Tuple[float, np.ndarray]:
        """
        Cost and its gradient with respect to the parameters.

        Args:
            params: Parameter vector
            method: parameter-shift, analytic-shift or finite-difference

        Returns:
            (cost, gradient)
        """
        if method not in GRADIENT_METHODS:
            raise ValueError(f"Unknown gradient method {method!r}; expected one of {GRADIENT_METHODS}")
        params = self._check(params)
        if method == "finite-difference":
            return self.cost(params), self._finite_difference(params)
        gates = self.plan.bind(params).base_circuit.gates

        def one(i: int) -> Tuple[float, np.ndarray]:
            series = self._forward(gates, self._states[i])
            model = np.stack([self._expectations(a) for a in series], axis=1)
            resid = model - self._records[:, i, :]
            weights = 2.0 * resid
            if method == "parameter-shift":
                slot = self._shift_state_grad(gates, i, weights)
            else:
                slot = self._adjoint_state_grad(gates, i, weights, series)
            return float(np.sum(resid ** 2)), slot

        parts = self._map_states(one)
        cost = 0.0
        slot_total = np.zeros(len(gates))
        for c, slot in parts:
            cost += c
            slot_total += slot
        return cost, self._reduce(slot_total)

    def gradient(self, params: Sequence[float], method: str = "analytic-shift") -> np.ndarray:
        return self.value_and_grad(params, method)[1]

    def _finite_difference(self, params: np.ndarray, step: float = FD_STEP) -> np.ndarray:
        grad = np.zeros(self.num_params)
        for j in range(self.num_params):
            shift = np.zeros(self.num_params)
            shift[j] = step
            grad[j] = (self.cost(params + shift) - self.cost(params - shift)) / (2 * step)
        return grad


# ----------------------------------------------------------------------------
# Functional surface
# ----------------------------------------------------------------------------

def cost(params: Sequence[float], model: ParamHamiltonian, dataset: TimeSeriesDataset,
         steps_per_dt: int = 4, ordering: str = "alternating") -> float:
    """Squared-error cost of a parameter vector against a dataset."""
    return HamiltonianLearner(model, dataset, steps_per_dt, ordering).cost(params)


def gradient(params: Sequence[float], model: ParamHamiltonian, dataset: TimeSeriesDataset,
             method: str = "analytic-shift", steps_per_dt: int = 4,
             ordering: str = "alternating") -> np.ndarray:
    """dCost/dparams by the chosen method."""
    return HamiltonianLearner(model, dataset, steps_per_dt, ordering).gradient(params, method)


def trace_distance_hamiltonians(h: ParamHamiltonian, k: ParamHamiltonian, t: float) -> float:
    """
    ||U_H(t)^dagger U_K(t) - I||_F / sqrt(dim).

    Args:
        h, k: Hamiltonians on the same register
        t: Reference time

    Returns:
        Normalized distance; 0 iff the two unitaries are equal (global phase included)
    """
    if h.num_sites != k.num_sites:
        raise DimensionError(f"Hamiltonians on {h.num_sites} and {k.num_sites} sites")
    dim = _check_cap(h.num_sites)
    w = exact_evolution(h, t).conj().T @ exact_evolution(k, t)
    return float(np.linalg.norm(w - np.eye(dim)) / math.sqrt(dim))


def phase_minimized_trace_distance(h: ParamHamiltonian, k: ParamHamiltonian, t: float) -> float:
    """min over phi of ||e^{i phi} U_H^dagger U_K - I||_F / sqrt(dim)."""
    if h.num_sites != k.num_sites:
        raise DimensionError(f"Hamiltonians on {h.num_sites} and {k.num_sites} sites")
    dim = _check_cap(h.num_sites)
    w = exact_evolution(h, t).conj().T @ exact_evolution(k, t)
    return float(math.sqrt(max(0.0, 2 * dim - 2 * abs(np.trace(w))) / dim))


def exact_predictions(hamiltonian: ParamHamiltonian, dataset: TimeSeriesDataset) -> np.ndarray:
    """Exact-dynamics expectations of a Hamiltonian on a dataset's states and observables."""
    if dataset.mode != "hamiltonian":
        raise DatasetError("Exact predictions need a hamiltonian-mode dataset")
    if dataset.num_sites != hamiltonian.num_sites:
        raise DatasetError(f"Dataset on {dataset.num_sites} sites, model on {hamiltonian.num_sites}")
    propagator = ExactPropagator(hamiltonian)
    out = np.empty(dataset.values.shape)
    for i, state in enumerate(dataset.initial_states):
        for k in range(1, dataset.n_timesteps + 1):
            amps = propagator.evolve(state.amplitudes, k * dataset.dt)
            for a, obs in enumerate(dataset.observables):
                out[a, i, k - 1] = expectation_array(amps, obs)
    return out


def validation_errors(learned: ParamHamiltonian, heldout: TimeSeriesDataset,
                      training_labels: Sequence[str] = ()) -> Dict[str, float]:
    """
    Mean squared deviation per held-out observable.

    Args:
        learned: Learned Hamiltonian
        heldout: Truth series (hamiltonian mode) for the held-out observables
        training_labels: Labels used for training; overlaps are logged

    Returns:
        {observable label: mean squared error over states and time steps}
    """
    overlap = set(heldout.labels) & set(training_labels)
    if overlap:
        logger.warning("Held-out observables %s were also used for training", sorted(overlap))
    model = exact_predictions(learned, heldout)
    errors = np.mean((model - heldout.values) ** 2, axis=(1, 2))
    return {label: float(e) for label, e in zip(heldout.labels, errors)}


def validation_error(learned: ParamHamiltonian, heldout: TimeSeriesDataset,
                     training_labels: Sequence[str] = ()) -> float:
    """Mean squared deviation over the whole held-out dataset."""
    overlap = set(heldout.labels) & set(training_labels)
    if overlap:
        logger.warning("Held-out observables %s were also used for training", sorted(overlap))
    model = exact_predictions(learned, heldout)
    return float(np.mean((model - heldout.values) ** 2))


def heldout_series(learned: ParamHamiltonian, truth: ParamHamiltonian, heldout: TimeSeriesDataset,
                   n_timesteps: Optional[int] = None) -> List[Dict[str, Any]]:
    """
    Rows (observable, i, k, t, truth, model) for plotting held-out dynamics.

    Args:
        learned: Learned Hamiltonian
        truth: True Hamiltonian
        heldout: Dataset fixing the states and observables
        n_timesteps: Series length (defaults to the dataset's)
    """
    steps = n_timesteps or heldout.n_timesteps
    rows = []
    for a, obs in enumerate(heldout.observables):
        for i, state in enumerate(heldout.initial_states):
            true_series = predict_series(truth, state, obs, steps, heldout.dt)
            model_series = predict_series(learned, state, obs, steps, heldout.dt)
            for k in range(steps):
                rows.append({"observable": obs.label, "i": i, "k": k + 1,
                             "t": (k + 1) * heldout.dt, "truth": float(true_series[k]),
                             "model": float(model_series[k])})
    return rows


def initial_params(num_params: int, seed: int, restart: int = 0) -> np.ndarray:
    """Seeded uniform [-1, 1] starting point."""
    return uniform_coeffs(num_params, seed, "init", restart)


def train(
    config: LearnConfig,
    dataset: TimeSeriesDataset,
    model: ParamHamiltonian,
    init: Optional[Sequence[float]] = None,
    heldout: Optional[TimeSeriesDataset] = None,
    truth: Optional[ParamHamiltonian] = None,
) -> TrainingTrace:
    """
    Gradient-descent training of the model coefficients.

    Args:
        config: Optimizer and Trotter settings
        dataset: Training records
        model: Family template (its coefficients are ignored)
        init: Starting parameters (seeded uniform draw when omitted)
        heldout: Held-out truth series for validation error
        truth: True Hamiltonian, enabling the trace-distance column

    Returns:
        TrainingTrace; final_params holds the learned coefficients
    """
    learner = HamiltonianLearner(model, dataset, config.steps_per_dt, config.ordering,
                                 config.cancel_gates, config.workers)
    x0 = np.asarray(init, dtype=float) if init is not None else initial_params(model.num_params, config.seed)
    horizon = dataset.n_timesteps * dataset.dt
    training_labels = dataset.labels

    def monitor(epoch: int, params: np.ndarray) -> Dict[str, Optional[float]]:
        candidate = model.with_coeffs(params)
        out: Dict[str, Optional[float]] = {}
        if truth is not None:
            out["trace_distance"] = trace_distance_hamiltonians(truth, candidate, horizon)
        if heldout is not None:
            out["validation_error"] = validation_error(candidate, heldout)
        return out

    trace = TrainingTrace(config.snapshot_every)
    trace.metadata = {
        "learner": "hamiltonian",
        "family": model.family_tag,
        "num_params": model.num_params,
        "gradient_method": config.gradient_method,
        "plan": learner.plan.report(),
    }
    optimize(
        lambda p: learner.value_and_grad(p, config.gradient_method),
        x0,
        config.learning_rate,
        config.max_epochs,
        config.cost_threshold,
        config.lr_decay,
        config.optimizer,
        monitor=monitor if (truth is not None or heldout is not None) else None,
        monitor_every=config.trace_every,
        trace=trace,
        log_every=config.snapshot_every,
        name="learn-ham",
    )
    if heldout is not None:
        trace.final_validation = validation_errors(model.with_coeffs(trace.final_params), heldout,
                                                   training_labels)
    if truth is not None:
        learned = model.with_coeffs(trace.final_params)
        trace.metadata["phase_minimized_trace_distance"] = phase_minimized_trace_distance(
            truth, learned, horizon)
    return trace


def train_with_restarts(
    config: LearnConfig,
    dataset: TimeSeriesDataset,
    model: ParamHamiltonian,
    heldout: Optional[TimeSeriesDataset] = None,
    truth: Optional[ParamHamiltonian] = None,
) -> TrainingTrace:
    """
    Best-of-N training from seeded random starts, ranked by final cost.

    Restarts that diverge are skipped; if all of them do, the last error is raised.
    """
    best: Optional[TrainingTrace] = None
    costs: List[Optional[float]] = []
    last_error: Optional[DivergenceError] = None
    for restart in range(config.restarts):
        x0 = initial_params(model.num_params, config.seed, restart)
        try:
            trace = train(config, dataset, model, x0, heldout, truth)
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
