"""
Dataset - Time-series observable records

Records O_{alpha,i,k}: observable alpha measured on source i (an initial
state, or a known Hamiltonian in state-learning mode) after k time steps.
Ground-truth data always comes from exact eigendecomposition dynamics,
never from a Trotter circuit.

Provides:
- TimeSeriesDataset with JSON/CSV persistence and stored provenance
- generate_ham_learning_data / generate_state_learning_data
- Observable pools: coherence_observables, correlator_pool, select_correlators
- predict_series, make_heldout_dataset, regenerate
"""

from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import itertools
import json
import logging

import numpy as np

from .errors import ArtifactIOError, ConfigError, DatasetError, DimensionError
from .pauli import (ExactPropagator, ParamHamiltonian, PauliObservable, PauliString,
                    correlator)
from .seeding import make_rng
from .simulator import StateVector, expectation_array, random_states
from .training_trace import format_csv

logger = logging.getLogger(__name__)

MODES = ("hamiltonian", "state", "su3")
FORMAT_TAG = "hamlearn-dataset"
BOUND_SLACK = 1e-9


def observable_from_dict(data: Dict[str, Any]) -> Any:
    """Decode a serialized observable ("pauli" or "gellmann")."""
    kind = data.get("kind", "pauli")
    if kind == "pauli":
        return PauliObservable.from_dict(data)
    if kind == "gellmann":
        from .su3 import GellMannObservable
        return GellMannObservable.from_dict(data)
    raise DatasetError(f"Unknown observable kind {kind!r}")


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """
    Complete set of time-series records.

    Attributes:
        mode: "hamiltonian" (sources are initial states), "state" (sources
            are known Hamiltonians) or "su3" (qutrit initial states)
        values: Array of shape (n_observables, n_sources, n_timesteps);
            values[a, i, k - 1] is the record at time step k
        observables: Measured observables, indexed by alpha
        dt: Time step
        initial_states: Sources in hamiltonian/su3 mode
        hamiltonians: Sources in state mode
        noise_sigma: Width of the additive Gaussian noise
        generator_info: Provenance (truth serialization, seeds)
    """
    mode: str
    values: np.ndarray
    observables: Tuple[Any, ...]
    dt: float
    initial_states: Tuple[StateVector, ...] = ()
    hamiltonians: Tuple[ParamHamiltonian, ...] = ()
    noise_sigma: float = 0.0
    generator_info: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise DatasetError(f"Unknown dataset mode {self.mode!r}")
        values = np.array(self.values, dtype=float)
        object.__setattr__(self, "observables", tuple(self.observables))
        object.__setattr__(self, "initial_states", tuple(self.initial_states))
        object.__setattr__(self, "hamiltonians", tuple(self.hamiltonians))
        sources = self.hamiltonians if self.mode == "state" else self.initial_states
        if values.ndim != 3 or values.shape[:2] != (len(self.observables), len(sources)):
            raise DimensionError(
                f"values shape {values.shape} does not match "
                f"{len(self.observables)} observables x {len(sources)} sources"
            )
        if values.shape[2] < 1:
            raise DatasetError("A dataset needs at least one time step")
        if not np.all(np.isfinite(values)):
            raise DatasetError("Dataset records must be finite")
        if not self.dt > 0:
            raise DatasetError(f"dt must be positive, got {self.dt}")
        if self.noise_sigma < 0:
            raise DatasetError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        for a, obs in enumerate(self.observables):
            limit = obs.bound + 5 * self.noise_sigma + BOUND_SLACK
            worst = float(np.max(np.abs(values[a])))
            if worst > limit:
                raise DatasetError(f"Record {worst:.6g} for {obs.label} exceeds bound {limit:.6g}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_observables(self) -> int:
        return self.values.shape[0]

    @property
    def n_sources(self) -> int:
        return self.values.shape[1]

    @property
    def n_timesteps(self) -> int:
        return self.values.shape[2]

    @property
    def n_records(self) -> int:
        return int(self.values.size)

    @property
    def num_sites(self) -> int:
        return self.observables[0].num_sites

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(1, self.n_timesteps + 1)

    @property
    def labels(self) -> List[str]:
        return [o.label for o in self.observables]

    def record(self, alpha: int, i: int, k: int) -> float:
        """Record of observable alpha on source i at time step k (1-based)."""
        if not 1 <= k <= self.n_timesteps:
            raise IndexError(f"Time step {k} outside 1..{self.n_timesteps}")
        return float(self.values[alpha, i, k - 1])

    def iter_records(self) -> Iterator[Tuple[int, int, int, float]]:
        """(alpha, i, k, value) in alpha-major, then i, then k order."""
        for a, i, k in itertools.product(range(self.n_observables), range(self.n_sources),
                                         range(self.n_timesteps)):
            yield a, i, k + 1, float(self.values[a, i, k])

    def with_values(self, values: np.ndarray) -> "TimeSeriesDataset":
        """Same dataset with replaced records."""
        return TimeSeriesDataset(self.mode, values, self.observables, self.dt, self.initial_states,
                                 self.hamiltonians, self.noise_sigma, dict(self.generator_info))

    def report(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "n_observables": self.n_observables,
            "n_sources": self.n_sources,
            "n_timesteps": self.n_timesteps,
            "n_records": self.n_records,
            "dt": self.dt,
            "noise_sigma": self.noise_sigma,
            "observables": self.labels,
        }

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": FORMAT_TAG,
            "mode": self.mode,
            "dt": self.dt,
            "n_timesteps": self.n_timesteps,
            "noise_sigma": self.noise_sigma,
            "observables": [o.to_dict() for o in self.observables],
            "initial_states": [s.to_dict() for s in self.initial_states],
            "hamiltonians": [h.to_dict() for h in self.hamiltonians],
            "generator_info": self.generator_info,
            "records": [{"alpha": a, "i": i, "k": k, "value": v}
                        for a, i, k, v in self.iter_records()],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TimeSeriesDataset":
        """Rebuild a dataset, checking that every (alpha, i, k) record is present."""
        if data.get("format") != FORMAT_TAG:
            raise DatasetError("Not a dataset document (missing format tag)")
        try:
            mode = data["mode"]
            n_t = int(data["n_timesteps"])
            observables = [observable_from_dict(o) for o in data["observables"]]
            states = [StateVector.from_dict(s) for s in data.get("initial_states", [])]
            hams = [ParamHamiltonian.from_dict(h) for h in data.get("hamiltonians", [])]
            n_src = len(hams) if mode == "state" else len(states)
            values = np.full((len(observables), n_src, n_t), np.nan)
            for rec in data["records"]:
                a, i, k = int(rec["alpha"]), int(rec["i"]), int(rec["k"])
                if not (0 <= a < len(observables) and 0 <= i < n_src and 1 <= k <= n_t):
                    raise DatasetError(f"Record index ({a}, {i}, {k}) out of range")
                values[a, i, k - 1] = float(rec["value"])
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, DatasetError):
                raise
            raise DatasetError(f"Malformed dataset document: {e}") from e
        if np.isnan(values).any():
            raise DatasetError(f"Dataset is missing {int(np.isnan(values).sum())} records")
        return cls(mode, values, tuple(observables), float(data["dt"]), tuple(states), tuple(hams),
                   float(data.get("noise_sigma", 0.0)), dict(data.get("generator_info", {})))

    def save_json(self, path: str, config: Optional[Dict[str, Any]] = None) -> None:
        """Write the dataset document, optionally embedding the resolved run config."""
        doc = self.to_dict()
        if config is not None:
            doc["config"] = config
        try:
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=1)
        except OSError as e:
            raise ArtifactIOError(f"Cannot write dataset {path}: {e}") from e

    @classmethod
    def load_json(cls, path: str) -> "TimeSeriesDataset":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as e:
            raise ArtifactIOError(f"Cannot read dataset {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise DatasetError(f"Dataset {path} is not valid JSON: {e}") from e
        return cls.from_dict(data)

    def to_csv(self, path: str) -> None:
        """alpha,i,k,value rows for plotting."""
        try:
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["alpha", "i", "k", "value"])
                for a, i, k, v in self.iter_records():
                    writer.writerow([a, i, k, format_csv(v)])
        except OSError as e:
            raise ArtifactIOError(f"Cannot write dataset CSV {path}: {e}") from e


# ----------------------------------------------------------------------------
# Generation
# ----------------------------------------------------------------------------

def _check_qubit_inputs(num_sites: int, states: Sequence[StateVector],
                        observables: Sequence[Any], n_timesteps: int, dt: float) -> None:
    if n_timesteps < 1:
        raise ValueError(f"n_timesteps must be >= 1, got {n_timesteps}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not states or not observables:
        raise DimensionError("Need at least one source and one observable")
    for s in states:
        if s.num_sites != num_sites or s.local_dim != 2:
            raise DimensionError(f"State on {s.num_sites} sites, expected {num_sites} qubits")
    for o in observables:
        if o.num_sites != num_sites:
            raise DimensionError(f"Observable {o.label} acts on {o.num_sites} sites, expected {num_sites}")


def _series(propagator: ExactPropagator, amps: np.ndarray, observables: Sequence[Any],
            n_timesteps: int, dt: float) -> np.ndarray:
    """(n_observables, n_timesteps) exact expectations for one source."""
    out = np.empty((len(observables), n_timesteps))
    for k in range(1, n_timesteps + 1):
        evolved = propagator.evolve(amps, k * dt)
        for a, obs in enumerate(observables):
            out[a, k - 1] = expectation_array(evolved, obs)
    return out


def add_noise(values: np.ndarray, noise_sigma: float, seed: int) -> np.ndarray:
    if noise_sigma > 0:
        values = values + make_rng(seed, "noise").normal(0.0, noise_sigma, size=values.shape)
    return values


def generate_ham_learning_data(
    hamiltonian: ParamHamiltonian,
    states: Sequence[StateVector],
    observables: Sequence[PauliObservable],
    n_timesteps: int,
    dt: float = 0.1,
    noise_sigma: float = 0.0,
    seed: int = 0,
    workers: int = 1,
    generator_info: Optional[Dict[str, Any]] = None,
) -> TimeSeriesDataset:
    """
    Records of every observable on every initial state under exact dynamics.

    Args:
        hamiltonian: True Hamiltonian
        states: Initial states |psi_i>
        observables: Observables O_alpha
        n_timesteps: Time steps per series (>= 1)
        dt: Time step
        noise_sigma: Additive Gaussian noise width
        seed: Seed of the noise stream
        workers: Threads used across initial states
        generator_info: Extra provenance merged into the stored info

    Returns:
        TimeSeriesDataset in hamiltonian mode
    """
    _check_qubit_inputs(hamiltonian.num_sites, states, observables, n_timesteps, dt)
    propagator = ExactPropagator(hamiltonian)

    def one(state: StateVector) -> np.ndarray:
        return _series(propagator, state.amplitudes, observables, n_timesteps, dt)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        per_state = list(pool.map(one, states))
    values = add_noise(np.stack(per_state, axis=1), noise_sigma, seed)
    info = {"kind": "hamiltonian", "hamiltonian": hamiltonian.to_dict(), "seed": seed}
    info.update(generator_info or {})
    logger.debug("Generated %d hamiltonian-mode records", values.size)
    return TimeSeriesDataset("hamiltonian", values, tuple(observables), dt, tuple(states), (),
                             noise_sigma, info)


def generate_state_learning_data(
    target: StateVector,
    hamiltonians: Sequence[ParamHamiltonian],
    observables: Sequence[PauliObservable],
    n_timesteps: int,
    dt: float = 0.1,
    noise_sigma: float = 0.0,
    seed: int = 0,
    generator_info: Optional[Dict[str, Any]] = None,
) -> TimeSeriesDataset:
    """
    Records of every observable on one state evolved under several known Hamiltonians.

    Args:
        target: True state
        hamiltonians: Known Hamiltonians U_i = exp(-i H_i t)
        observables: Observables O_alpha
        n_timesteps: Time steps per series (>= 1)
        dt: Time step
        noise_sigma: Additive Gaussian noise width
        seed: Seed of the noise stream
        generator_info: Extra provenance merged into the stored info

    Returns:
        TimeSeriesDataset in state mode
    """
    if not hamiltonians:
        raise DimensionError("Need at least one Hamiltonian")
    _check_qubit_inputs(target.num_sites, [target], observables, n_timesteps, dt)
    for h in hamiltonians:
        if h.num_sites != target.num_sites:
            raise DimensionError(f"Hamiltonian on {h.num_sites} sites, state on {target.num_sites}")
    per_ham = [_series(ExactPropagator(h), target.amplitudes, observables, n_timesteps, dt)
               for h in hamiltonians]
    values = add_noise(np.stack(per_ham, axis=1), noise_sigma, seed)
    info = {"kind": "state", "state": target.to_dict(), "seed": seed}
    info.update(generator_info or {})
    return TimeSeriesDataset("state", values, tuple(observables), dt, (), tuple(hamiltonians),
                             noise_sigma, info)


# ----------------------------------------------------------------------------
# Observable pools
# ----------------------------------------------------------------------------

# single-site expansions of |a><b| over I, X, Y, Z
_OUTER = {
    (0, 0): {"I": 0.5, "Z": 0.5},
    (1, 1): {"I": 0.5, "Z": -0.5},
    (0, 1): {"X": 0.5, "Y": 0.5j},
    (1, 0): {"X": 0.5, "Y": -0.5j},
}


def _outer_expansion(m: int, mp: int, num_qubits: int) -> Dict[str, complex]:
    """Pauli coefficients of |m><m'|."""
    bits_m = [(m >> (num_qubits - 1 - s)) & 1 for s in range(num_qubits)]
    bits_mp = [(mp >> (num_qubits - 1 - s)) & 1 for s in range(num_qubits)]
    coeffs: Dict[str, complex] = {"": 1.0}
    for a, b in zip(bits_m, bits_mp):
        coeffs = {ops + p: c * w for ops, c in coeffs.items() for p, w in _OUTER[(a, b)].items()}
    return coeffs


def _hermitian_part(coeffs: Dict[str, complex], part: str, label: str) -> PauliObservable:
    weights = [(2 * c.real if part == "re" else 2 * c.imag, ops) for ops, c in
               ((ops, complex(c)) for ops, c in coeffs.items())]
    terms = tuple((w, PauliString(ops)) for w, ops in weights if abs(w) > 1e-15)
    return PauliObservable(terms, label)


def coherence_observables(num_qubits: int) -> List[PauliObservable]:
    """
    Probability and coherence observables over the computational basis.

    For every basis state m the projector |m><m|, then for every pair m < m'
    the operators |m><m'| + |m'><m| and -i(|m><m'| - |m'><m|). The 4^n
    operators span the Hermitian matrices, so the set is informationally
    complete. For one qubit this is (I+Z)/2, (I-Z)/2, X, Y.
    """
    if num_qubits < 1:
        raise ValueError(f"num_qubits must be >= 1, got {num_qubits}")
    dim = 2 ** num_qubits
    width = num_qubits

    def bits(m: int) -> str:
        return format(m, f"0{width}b")

    out: List[PauliObservable] = []
    for m in range(dim):
        coeffs = _outer_expansion(m, m, num_qubits)
        terms = tuple((c.real, PauliString(ops)) for ops, c in
                      ((ops, complex(c)) for ops, c in coeffs.items()))
        out.append(PauliObservable(terms, f"P{bits(m)}"))
    for m, mp in itertools.combinations(range(dim), 2):
        coeffs = _outer_expansion(m, mp, num_qubits)
        out.append(_hermitian_part(coeffs, "re", f"S{bits(m)}_{bits(mp)}"))
        out.append(_hermitian_part(coeffs, "im", f"A{bits(m)}_{bits(mp)}"))
    return out


def select_coherence_observables(num_qubits: int, n_observables: Optional[int],
                                 seed: int) -> List[PauliObservable]:
    """All coherence observables, or a seeded subset of n_observables of them."""
    pool = coherence_observables(num_qubits)
    if n_observables is None or n_observables >= len(pool):
        return pool
    picks = make_rng(seed, "coherence", num_qubits).choice(len(pool), n_observables, replace=False)
    return [pool[p] for p in sorted(picks)]


def correlator_pool(num_sites: int, axis: str) -> List[PauliObservable]:
    """All two-point correlators axis_i axis_j, i < j."""
    return [correlator(num_sites, pair, axis * 2)
            for pair in itertools.combinations(range(num_sites), 2)]


def select_correlators(num_sites: int, n_per_axis: int, seed: int,
                       axes: Sequence[str] = ("Z", "X")) -> List[PauliObservable]:
    """
    Randomly selected correlators, n_per_axis for every axis.

    Draws are without replacement from the two-point pool of each axis.
    When n_per_axis exceeds that pool, single-site operators on the same
    axis follow. Selections are nested: a larger n_per_axis keeps every
    observable a smaller one picked.

    Returns:
        Observables grouped by axis (ZZ-type first by default)
    """
    if n_per_axis < 1:
        raise ValueError(f"n_per_axis must be >= 1, got {n_per_axis}")
    out: List[PauliObservable] = []
    for axis in axes:
        pairs = correlator_pool(num_sites, axis)
        singles = [correlator(num_sites, (s,), axis) for s in range(num_sites)]
        if n_per_axis > len(pairs) + len(singles):
            raise ConfigError(
                f"Only {len(pairs) + len(singles)} {axis}-type observables exist on {num_sites} sites"
            )
        rng = make_rng(seed, "correlators", axis, num_sites)
        ordered = [pairs[p] for p in rng.permutation(len(pairs))]
        ordered += [singles[p] for p in rng.permutation(len(singles))]
        out.extend(ordered[:n_per_axis])
    return out


# ----------------------------------------------------------------------------
# Held-out data and replay
# ----------------------------------------------------------------------------

def predict_series(hamiltonian: ParamHamiltonian, state: StateVector, observable: PauliObservable,
                   n_timesteps: int, dt: float) -> np.ndarray:
    """Exact <O>(k dt) for k = 1..n_timesteps."""
    _check_qubit_inputs(hamiltonian.num_sites, [state], [observable], n_timesteps, dt)
    return _series(ExactPropagator(hamiltonian), state.amplitudes, [observable], n_timesteps, dt)[0]


def make_heldout_dataset(hamiltonian: ParamHamiltonian, labels: Sequence[str], n_states: int,
                         n_timesteps: int, dt: float, seed: int) -> TimeSeriesDataset:
    """
    Truth series of named observables on fresh random states.

    Args:
        hamiltonian: True Hamiltonian
        labels: Observable names (XM, ZM, XXX, ZZZ or raw Pauli strings)
        n_states: Number of validation states
        n_timesteps: Series length
        dt: Time step
        seed: Seed of the validation-state stream

    Returns:
        Hamiltonian-mode dataset tagged as held-out
    """
    observables = [PauliObservable.from_label(lab, hamiltonian.num_sites) for lab in labels]
    state_seed = int(make_rng(seed, "heldout").integers(2 ** 62))
    states = random_states(n_states, hamiltonian.num_sites, state_seed)
    return generate_ham_learning_data(hamiltonian, states, observables, n_timesteps, dt,
                                      seed=seed, generator_info={"heldout": True,
                                                                 "state_seed": state_seed})


def regenerate(dataset: TimeSeriesDataset) -> TimeSeriesDataset:
    """Rebuild a dataset from its stored provenance, sources and observables."""
    info = dataset.generator_info
    try:
        kind = info["kind"]
        seed = int(info.get("seed", 0))
        if kind == "hamiltonian":
            ham = ParamHamiltonian.from_dict(info["hamiltonian"])
            return generate_ham_learning_data(ham, dataset.initial_states, dataset.observables,
                                              dataset.n_timesteps, dataset.dt, dataset.noise_sigma,
                                              seed, generator_info=info)
        if kind == "state":
            target = StateVector.from_dict(info["state"])
            return generate_state_learning_data(target, dataset.hamiltonians, dataset.observables,
                                                dataset.n_timesteps, dataset.dt,
                                                dataset.noise_sigma, seed, generator_info=info)
        if kind == "su3":
            from .su3 import generate_su3_data
            return generate_su3_data(info["coeffs"], dataset.initial_states, dataset.observables,
                                     dataset.n_timesteps, dataset.dt, dataset.noise_sigma, seed)
    except KeyError as e:
        raise DatasetError(f"generator_info is missing {e}") from e
    raise DatasetError(f"Cannot regenerate a dataset of kind {kind!r}")
