"""
SU(3) - Qutrit Hamiltonian learning with nested-commutator gradients

H = sum_{a=1..8} c_a lambda_a on a single qutrit. The Heisenberg-picture
observable U^dagger O U with U = exp(-iHt) is expanded as

    e^A O e^-A = sum_n T_n,   T_0 = O,  T_n = [A, T_{n-1}] / n,   A = i t H

and its derivative along c_p follows the same recursion:

    D_0 = 0,  D_n = ([i t lambda_p, T_{n-1}] + [A, D_{n-1}]) / n

Both series are expanded on {lambda_1..lambda_8, I}, so every cost and
gradient term reduces to the nine expectations <psi_i|lambda_j|psi_i>.
"""

from typing import Any, Dict, List, Optional, Sequence, Set, Tuple
from dataclasses import dataclass, field
from functools import lru_cache
import logging
import math

import numpy as np
import scipy.linalg

from .config import Su3LearnConfig
from .dataset import TimeSeriesDataset, add_noise
from .errors import ConfigError, DatasetError, DimensionError
from .optim import optimize
from .seeding import make_rng, uniform_coeffs
from .simulator import StateVector, expectation_array, random_state
from .training_trace import TrainingTrace

logger = logging.getLogger(__name__)

NUM_GENERATORS = 8
NUM_PRIMITIVES = 9
SERIES_RADIUS = 1.0
TAIL_TOLERANCE = 1e-8


def _gell_mann_table() -> np.ndarray:
    s3 = 1.0 / math.sqrt(3.0)
    table = np.zeros((NUM_PRIMITIVES, 3, 3), dtype=complex)
    table[0][0, 1] = table[0][1, 0] = 1
    table[1][0, 1], table[1][1, 0] = -1j, 1j
    table[2][0, 0], table[2][1, 1] = 1, -1
    table[3][0, 2] = table[3][2, 0] = 1
    table[4][0, 2], table[4][2, 0] = -1j, 1j
    table[5][1, 2] = table[5][2, 1] = 1
    table[6][1, 2], table[6][2, 1] = -1j, 1j
    table[7] = s3 * np.diag([1, 1, -2])
    table[8] = np.eye(3)
    table.setflags(write=False)
    return table


GELL_MANN = _gell_mann_table()


def gell_mann(index: int) -> np.ndarray:
    """lambda_index for index 1..9 (lambda_9 is the 3x3 identity)."""
    if not 1 <= index <= NUM_PRIMITIVES:
        raise ValueError(f"Gell-Mann index must be in 1..9, got {index}")
    return GELL_MANN[index - 1].copy()


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def decompose(matrix: np.ndarray) -> np.ndarray:
    """
    Coefficients g with matrix = sum_j g_j lambda_j (j = 1..9).

    g_j = tr(lambda_j M) / 2 for the generators and g_9 = tr(M) / 3; real for
    Hermitian M.
    """
    g = np.array([np.trace(GELL_MANN[j] @ matrix) / 2 for j in range(NUM_GENERATORS)]
                 + [np.trace(matrix) / 3])
    return g.real


@dataclass(frozen=True)
class StructureConstants:
    """
    Totally antisymmetric f^{abc} with [lambda_a, lambda_b] = 2i sum_c f^{abc} lambda_c.

    Attributes:
        tensor: 8x8x8 real array, 0-based
    """
    tensor: np.ndarray

    def f(self, a: int, b: int, c: int) -> float:
        """f^{abc} with 1-based indices."""
        return float(self.tensor[a - 1, b - 1, c - 1])

    def commutator(self, a: int, b: int) -> np.ndarray:
        """[lambda_a, lambda_b] rebuilt from the constants (1-based)."""
        return 2j * np.einsum("c,cij->ij", self.tensor[a - 1, b - 1], GELL_MANN[:NUM_GENERATORS])


@lru_cache(maxsize=1)
def structure_constants() -> StructureConstants:
    """f^{abc} = -(i/4) tr(lambda_a [lambda_b, lambda_c]), computed once."""
    f = np.zeros((NUM_GENERATORS,) * 3)
    for a in range(NUM_GENERATORS):
        for b in range(NUM_GENERATORS):
            for c in range(NUM_GENERATORS):
                value = -0.25j * np.trace(GELL_MANN[a] @ commutator(GELL_MANN[b], GELL_MANN[c]))
                f[a, b, c] = value.real
    f.setflags(write=False)
    return StructureConstants(f)


def _check_coeffs(c: Sequence[float]) -> np.ndarray:
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.size != NUM_GENERATORS:
        raise DimensionError(f"SU(3) Hamiltonians take 8 coefficients, got {c.size}")
    if not np.all(np.isfinite(c)):
        raise ConfigError("SU(3) coefficients must be finite")
    return c


@dataclass(frozen=True, eq=False)
class QutritHamiltonian:
    """
    H = sum_a c_a lambda_a.

    Attributes:
        coeffs: Real 8-vector
    """
    coeffs: np.ndarray

    def __post_init__(self):
        c = _check_coeffs(self.coeffs)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def matrix(self) -> np.ndarray:
        return np.einsum("a,aij->ij", self.coeffs, GELL_MANN[:NUM_GENERATORS])

    def unitary(self, t: float) -> np.ndarray:
        """exp(-iHt) from the 3x3 eigendecomposition."""
        energies, vectors = scipy.linalg.eigh(self.matrix())
        return (vectors * np.exp(-1j * energies * t)) @ vectors.conj().T

    def to_dict(self) -> Dict[str, Any]:
        return {"coeffs": self.coeffs.tolist()}


@dataclass(frozen=True)
class GellMannObservable:
    """
    Real combination of Gell-Mann matrices and the identity.

    Attributes:
        weights: (weight, index 1..9) pairs
        label: Name used in files; "lambda_k" for a single matrix
    """
    weights: Tuple[Tuple[float, int], ...]
    label: str = ""

    def __post_init__(self):
        weights = tuple((float(w), int(j)) for w, j in self.weights)
        if not weights or any(not 1 <= j <= NUM_PRIMITIVES for _, j in weights):
            raise ValueError(f"Gell-Mann indices must be in 1..9, got {self.weights}")
        object.__setattr__(self, "weights", weights)
        if not self.label:
            object.__setattr__(self, "label", "+".join(
                f"lambda_{j}" if w == 1.0 else f"{w:g}*lambda_{j}" for w, j in weights))

    @classmethod
    def from_index(cls, index: int) -> "GellMannObservable":
        return cls(((1.0, index),), f"lambda_{index}")

    @property
    def num_sites(self) -> int:
        return 1

    @property
    def local_dim(self) -> int:
        return 3

    @property
    def bound(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix()))))

    def matrix(self) -> np.ndarray:
        return sum(w * GELL_MANN[j - 1] for w, j in self.weights)

    def apply(self, amps: np.ndarray) -> np.ndarray:
        return self.matrix() @ amps

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "gellmann", "label": self.label, "terms": [[w, j] for w, j in self.weights]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GellMannObservable":
        return cls(tuple((float(w), int(j)) for w, j in data["terms"]), data.get("label", ""))


# ----------------------------------------------------------------------------
# Nested-commutator series
# ----------------------------------------------------------------------------

def _series_terms(c: np.ndarray, observable: np.ndarray, t: float, order: int) -> List[np.ndarray]:
    a = 1j * t * np.einsum("a,aij->ij", c, GELL_MANN[:NUM_GENERATORS])
    terms = [np.asarray(observable, dtype=complex)]
    for n in range(1, order + 1):
        terms.append(commutator(a, terms[-1]) / n)
    return terms


def bch_conjugation(c: Sequence[float], observable: np.ndarray, t: float, order: int) -> np.ndarray:
    """
    Truncated series for U^dagger O U, U = exp(-iHt).

    Args:
        c: Hamiltonian coefficients (8)
        observable: 3x3 Hermitian matrix
        t: Time
        order: Highest commutator order kept (>= 0)

    Returns:
        3x3 Hermitian matrix
    """
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    terms = _series_terms(_check_coeffs(c), observable, t, order)
    out = sum(terms)
    return 0.5 * (out + out.conj().T)


def bch_gradient(c: Sequence[float], observable: np.ndarray, t: float, order: int, p: int) -> np.ndarray:
    """
    Truncated series for d(U^dagger O U)/dc_p.

    Args:
        c: Hamiltonian coefficients (8)
        observable: 3x3 Hermitian matrix
        t: Time
        order: Highest commutator order kept
        p: Coefficient index 1..8

    Returns:
        3x3 Hermitian matrix; order 1 gives i t [lambda_p, O]
    """
    if not 1 <= p <= NUM_GENERATORS:
        raise ValueError(f"p must be in 1..8, got {p}")
    c = _check_coeffs(c)
    terms = _series_terms(c, observable, t, max(order - 1, 0))
    a = 1j * t * np.einsum("a,aij->ij", c, GELL_MANN[:NUM_GENERATORS])
    da = 1j * t * GELL_MANN[p - 1]
    d = np.zeros((3, 3), dtype=complex)
    total = np.zeros((3, 3), dtype=complex)
    for n in range(1, order + 1):
        d = (commutator(da, terms[n - 1]) + commutator(a, d)) / n
        total = total + d
    return 0.5 * (total + total.conj().T)


def exact_conjugation(c: Sequence[float], observable: np.ndarray, t: float) -> np.ndarray:
    """U^dagger O U by eigendecomposition."""
    u = QutritHamiltonian(np.asarray(c, dtype=float)).unitary(t)
    return u.conj().T @ observable @ u


def exact_gradient(c: Sequence[float], observable: np.ndarray, t: float, p: int) -> np.ndarray:
    """d(U^dagger O U)/dc_p through the Frechet derivative of exp(i t H)."""
    c = _check_coeffs(c)
    a = 1j * t * np.einsum("a,aij->ij", c, GELL_MANN[:NUM_GENERATORS])
    v, dv = scipy.linalg.expm_frechet(a, 1j * t * GELL_MANN[p - 1])
    out = dv @ observable @ v.conj().T + v @ observable @ dv.conj().T
    return 0.5 * (out + out.conj().T)


def _use_series(c: np.ndarray, observable: np.ndarray, t: float, order: int) -> bool:
    """Series only inside its radius and when the first dropped term is negligible."""
    if abs(t) * np.sum(np.abs(c)) > SERIES_RADIUS:
        return False
    tail = _series_terms(c, observable, t, order + 1)[-1]
    return float(np.linalg.norm(tail)) < TAIL_TOLERANCE


# ----------------------------------------------------------------------------
# Data, cost and gradient
# ----------------------------------------------------------------------------

def _check_su3_dataset(dataset: TimeSeriesDataset) -> None:
    if dataset.mode != "su3":
        raise DatasetError(f"SU(3) learning needs an su3-mode dataset, got {dataset.mode}")


def generate_su3_data(
    coeffs: Sequence[float],
    states: Sequence[StateVector],
    observables: Sequence[GellMannObservable],
    n_timesteps: int,
    dt: float = 0.1,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> TimeSeriesDataset:
    """
    Exact qutrit records <psi_i|U(k dt)^dagger O_alpha U(k dt)|psi_i>.

    Returns:
        TimeSeriesDataset in su3 mode
    """
    if n_timesteps < 1:
        raise ValueError(f"n_timesteps must be >= 1, got {n_timesteps}")
    for s in states:
        if s.local_dim != 3 or s.num_sites != 1:
            raise DimensionError("SU(3) data needs single-qutrit states")
    ham = QutritHamiltonian(np.asarray(coeffs, dtype=float))
    values = np.empty((len(observables), len(states), n_timesteps))
    for k in range(1, n_timesteps + 1):
        u = ham.unitary(k * dt)
        for i, s in enumerate(states):
            evolved = u @ s.amplitudes
            for a, obs in enumerate(observables):
                values[a, i, k - 1] = expectation_array(evolved, obs)
    values = add_noise(values, noise_sigma, seed)
    info = {"kind": "su3", "coeffs": ham.coeffs.tolist(), "seed": seed}
    return TimeSeriesDataset("su3", values, tuple(observables), dt, tuple(states), (), noise_sigma, info)


def random_qutrit_states(count: int, seed: int) -> List[StateVector]:
    return [random_state(1, int(make_rng(seed, "qutrits", i).integers(2 ** 62)), local_dim=3)
            for i in range(count)]


def su3_cost(c: Sequence[float], dataset: TimeSeriesDataset) -> float:
    """Squared-error cost under exact qutrit dynamics."""
    _check_su3_dataset(dataset)
    ham = QutritHamiltonian(np.asarray(c, dtype=float))
    total = 0.0
    for k in range(1, dataset.n_timesteps + 1):
        u = ham.unitary(k * dataset.dt)
        for i, s in enumerate(dataset.initial_states):
            evolved = u @ s.amplitudes
            for a, obs in enumerate(dataset.observables):
                total += (expectation_array(evolved, obs) - dataset.values[a, i, k - 1]) ** 2
    return float(total)


@dataclass
class MeasurementLedger:
    """
    Primitive expectations <psi_i|lambda_j|psi_i> a gradient evaluation needs.

    Attributes:
        entries: (alpha, i, j) triples, j = 1..9
        n_timesteps: Series length the gradient covered
        flagged: Observables (by label) that are not Hermitian 3x3 matrices
        exact_fallbacks: Terms evaluated by exact conjugation instead of the series
    """
    entries: Set[Tuple[int, int, int]] = field(default_factory=set)
    n_timesteps: int = 0
    flagged: List[str] = field(default_factory=list)
    exact_fallbacks: int = 0

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def valid(self) -> bool:
        """Whether the nine-per-(observable, state) count holds."""
        return not self.flagged

    def report(self) -> Dict[str, Any]:
        return {
            "primitive_measurements": self.size,
            "n_timesteps": self.n_timesteps,
            "valid": self.valid,
            "flagged": list(self.flagged),
            "exact_fallbacks": self.exact_fallbacks,
        }


def su3_value_and_grad(c: Sequence[float], dataset: TimeSeriesDataset,
                       order: int = 12) -> Tuple[float, np.ndarray, MeasurementLedger]:
    """
    Cost, gradient and measurement ledger from primitive expectations.

    The model expectation and every gradient sandwich are expanded on the
    nine primitives, so only <psi_i|lambda_j|psi_i> enter, whatever N_T is.
    The gradient is residual-weighted: dC/dc_p = sum 2 r_{alpha,i,k} <psi_i|D_p|psi_i>.
    """
    _check_su3_dataset(dataset)
    c = _check_coeffs(c)
    ledger = MeasurementLedger(n_timesteps=dataset.n_timesteps)
    primitives = np.array([[expectation_array(s.amplitudes, _Primitive(j)) for j in range(NUM_PRIMITIVES)]
                           for s in dataset.initial_states])
    cost = 0.0
    grad = np.zeros(NUM_GENERATORS)
    for a, obs in enumerate(dataset.observables):
        o = obs.matrix()
        if o.shape != (3, 3) or not np.allclose(o, o.conj().T, atol=1e-12):
            ledger.flagged.append(obs.label)
            logger.warning("Observable %s is outside the Gell-Mann span; ledger count void", obs.label)
        for i in range(dataset.n_sources):
            for j in range(1, NUM_PRIMITIVES + 1):
                ledger.entries.add((a, i, j))
        for k in range(1, dataset.n_timesteps + 1):
            t = k * dataset.dt
            if _use_series(c, o, t, order):
                heis = bch_conjugation(c, o, t, order)
                derivs = [bch_gradient(c, o, t, order, p) for p in range(1, NUM_GENERATORS + 1)]
            else:
                ledger.exact_fallbacks += 1
                heis = exact_conjugation(c, o, t)
                derivs = [exact_gradient(c, o, t, p) for p in range(1, NUM_GENERATORS + 1)]
            model = primitives @ decompose(heis)
            resid = model - dataset.values[a, :, k - 1]
            cost += float(np.sum(resid ** 2))
            dmodel = np.stack([primitives @ decompose(d) for d in derivs], axis=1)
            grad += 2.0 * resid @ dmodel
    if ledger.exact_fallbacks:
        logger.debug("%d terms used exact conjugation", ledger.exact_fallbacks)
    return cost, grad, ledger


def su3_cost_gradient(c: Sequence[float], dataset: TimeSeriesDataset,
                      order: int = 12) -> Tuple[np.ndarray, MeasurementLedger]:
    """Gradient of the qutrit cost and the measurement ledger it required."""
    _, grad, ledger = su3_value_and_grad(c, dataset, order)
    return grad, ledger


class _Primitive:
    """lambda_j (0-based) in the shape expectation_array expects."""

    def __init__(self, j: int):
        self._matrix = GELL_MANN[j]

    def apply(self, amps: np.ndarray) -> np.ndarray:
        return self._matrix @ amps


def unitary_distance(c: Sequence[float], d: Sequence[float], t: float) -> float:
    """||U_c(t)^dagger U_d(t) - I||_F / sqrt(3)."""
    w = QutritHamiltonian(np.asarray(c, dtype=float)).unitary(t).conj().T @ \
        QutritHamiltonian(np.asarray(d, dtype=float)).unitary(t)
    return float(np.linalg.norm(w - np.eye(3)) / math.sqrt(3))


def learn_su3(
    config: Su3LearnConfig,
    dataset: TimeSeriesDataset,
    init: Optional[Sequence[float]] = None,
    truth: Optional[Sequence[float]] = None,
) -> TrainingTrace:
    """
    Gradient-descent recovery of the eight coefficients.

    Args:
        config: Optimizer and series settings
        dataset: su3-mode records
        init: Starting coefficients (seeded uniform [-1, 1] when omitted)
        truth: True coefficients, enabling the trace-distance column

    Returns:
        TrainingTrace with the last measurement ledger in metadata
    """
    _check_su3_dataset(dataset)
    x0 = np.asarray(init, dtype=float) if init is not None else uniform_coeffs(8, config.seed, "su3-init")
    horizon = dataset.n_timesteps * dataset.dt
    ledgers: List[MeasurementLedger] = []

    def value_and_grad(params: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad, ledger = su3_value_and_grad(params, dataset, config.bch_order)
        ledgers[:] = [ledger]
        return value, grad

    def monitor(epoch: int, params: np.ndarray) -> Dict[str, Optional[float]]:
        return {"trace_distance": unitary_distance(truth, params, horizon)}

    trace = TrainingTrace(config.snapshot_every)
    optimize(value_and_grad, x0, config.learning_rate, config.max_epochs, config.cost_threshold,
             config.lr_decay, config.optimizer, monitor=monitor if truth is not None else None,
             trace=trace, log_every=config.snapshot_every, name="learn-su3")
    ledger = ledgers[-1]
    if ledger.exact_fallbacks:
        logger.warning("Series outside its radius for %d terms; exact conjugation used",
                       ledger.exact_fallbacks)
    trace.metadata = {"learner": "su3", "bch_order": config.bch_order, "ledger": ledger.report()}
    return trace
