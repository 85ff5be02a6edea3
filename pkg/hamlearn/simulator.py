"""
Simulator - Dense statevector simulation

Cost: O(d^n) memory, one tensor contraction per gate
Purpose: Apply gates and circuits to states, evaluate observables

Conventions (used everywhere in the package):
- Rotations are R_P(theta) = exp(-i theta P / 2) for every Pauli P.
- Site 0 is the most significant index of the amplitude array, so the
  basis state |q0 q1 ... q_{n-1}> sits at index sum_s q_s d^(n-1-s).
- Two-qubit controlled gates list their targets as (control, target).

The main path never builds a full 2^n x 2^n matrix; gates act on the
amplitude tensor along their target axes. Dense composed matrices live in
``hamlearn.oracle`` and are used only to check this module.
"""

from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple
from dataclasses import dataclass
import logging
import math

import numpy as np

from .errors import ConfigError, DimensionError
from .seeding import make_rng

logger = logging.getLogger(__name__)

PAULI_MATRICES: Dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

ROTATION_KINDS = {"RX": "X", "RY": "Y", "RZ": "Z"}
CONTROLLED_KINDS = {"CNOT": "X", "CY": "Y"}
GATE_KINDS = set(ROTATION_KINDS) | set(CONTROLLED_KINDS) | {"RPP"}

NORM_TOLERANCE = 1e-10


def rotation_matrix(generator: np.ndarray, angle: float) -> np.ndarray:
    """exp(-i angle G / 2) for an involutory generator G (G @ G = I)."""
    dim = generator.shape[0]
    return math.cos(angle / 2) * np.eye(dim, dtype=complex) - 1j * math.sin(angle / 2) * generator


def _controlled(target_op: np.ndarray) -> np.ndarray:
    matrix = np.eye(4, dtype=complex)
    matrix[2:, 2:] = target_op
    return matrix


@dataclass(frozen=True)
class Gate:
    """
    A one- or two-qubit gate.

    Attributes:
        kind: One of RX, RY, RZ, CNOT, CY, RPP
        targets: Site indices; (control, target) for CNOT/CY
        angle: Rotation angle in radians (rotation kinds only)
        pauli: Two-letter Pauli pair for RPP, e.g. "ZZ"
    """
    kind: str
    targets: Tuple[int, ...]
    angle: Optional[float] = None
    pauli: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind not in GATE_KINDS:
            raise ValueError(f"Unknown gate kind: {self.kind}")
        arity = 1 if self.kind in ROTATION_KINDS else 2
        if len(self.targets) != arity:
            raise DimensionError(f"{self.kind} needs {arity} target(s), got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise DimensionError(f"{self.kind} targets must be distinct, got {self.targets}")
        if any(t < 0 for t in self.targets):
            raise DimensionError(f"Negative target index in {self.targets}")
        if self.is_rotation:
            if self.angle is None or not math.isfinite(self.angle):
                raise ConfigError(f"{self.kind} needs a finite angle, got {self.angle}")
            object.__setattr__(self, "angle", float(self.angle))
        if self.kind == "RPP":
            if self.pauli is None or len(self.pauli) != 2 or any(p not in "XYZ" for p in self.pauli):
                raise ValueError(f"RPP needs a Pauli pair over XYZ, got {self.pauli}")

    @property
    def is_rotation(self) -> bool:
        """Whether the gate is a Pauli rotation carrying an angle."""
        return self.kind in ROTATION_KINDS or self.kind == "RPP"

    @property
    def name(self) -> str:
        if self.kind == "RPP":
            return f"R{self.pauli}"
        return self.kind

    def generator(self) -> np.ndarray:
        """Pauli generator P of a rotation exp(-i theta P / 2)."""
        if self.kind in ROTATION_KINDS:
            return PAULI_MATRICES[ROTATION_KINDS[self.kind]]
        if self.kind == "RPP":
            return np.kron(PAULI_MATRICES[self.pauli[0]], PAULI_MATRICES[self.pauli[1]])
        raise ValueError(f"{self.kind} is not a Pauli rotation")

    def matrix(self) -> np.ndarray:
        """Local unitary on the gate's targets (2x2 or 4x4)."""
        if self.is_rotation:
            return rotation_matrix(self.generator(), self.angle)
        return _controlled(PAULI_MATRICES[CONTROLLED_KINDS[self.kind]])

    def with_angle(self, angle: float) -> "Gate":
        return Gate(self.kind, self.targets, angle, self.pauli)

    def shifted(self, delta: float) -> "Gate":
        """Same rotation with its angle moved by delta."""
        return self.with_angle(self.angle + delta)

    def inverse(self) -> "Gate":
        if self.is_rotation:
            return self.with_angle(-self.angle)
        return self  # CNOT and CY are self-inverse

    def dump(self) -> str:
        """One line of the plain-text gate list: NAME targets [angle]."""
        targets = ",".join(str(t) for t in self.targets)
        if self.is_rotation:
            return f"{self.name} {targets} {self.angle:.12g}"
        return f"{self.name} {targets}"


@dataclass(frozen=True)
class Circuit:
    """
    Ordered gate list on a fixed number of sites.

    Attributes:
        num_sites: Register size
        gates: Gates in application order
    """
    num_sites: int
    gates: Tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for gate in self.gates:
            if max(gate.targets) >= self.num_sites:
                raise DimensionError(
                    f"Gate {gate.dump()} targets site outside a {self.num_sites}-site register"
                )

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def extended(self, gates: Iterable[Gate]) -> "Circuit":
        return Circuit(self.num_sites, self.gates + tuple(gates))

    def repeated(self, times: int) -> "Circuit":
        return Circuit(self.num_sites, self.gates * times)

    def inverse(self) -> "Circuit":
        return Circuit(self.num_sites, tuple(g.inverse() for g in reversed(self.gates)))

    def depth(self) -> int:
        """Circuit depth under as-soon-as-possible scheduling."""
        level = [0] * self.num_sites
        for gate in self.gates:
            start = max(level[t] for t in gate.targets) + 1
            for t in gate.targets:
                level[t] = start
        return max(level) if level else 0

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    @property
    def two_qubit_count(self) -> int:
        return sum(1 for g in self.gates if len(g.targets) == 2)

    def dump(self) -> str:
        """Plain-text gate list, one gate per line."""
        return "\n".join(g.dump() for g in self.gates)


@dataclass(frozen=True, eq=False)
class StateVector:
    """
    Normalized amplitude vector of a register of qubits or qutrits.

    Attributes:
        amplitudes: Complex vector of length local_dim ** num_sites (read-only)
        num_sites: Number of sites
        local_dim: 2 for qubits, 3 for qutrits
    """
    amplitudes: np.ndarray
    num_sites: int
    local_dim: int = 2

    def __post_init__(self):
        if self.local_dim not in (2, 3):
            raise DimensionError(f"local_dim must be 2 or 3, got {self.local_dim}")
        if self.num_sites < 1:
            raise DimensionError(f"num_sites must be >= 1, got {self.num_sites}")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.local_dim ** self.num_sites:
            raise DimensionError(
                f"Expected {self.local_dim ** self.num_sites} amplitudes, got {amps.size}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise DimensionError(f"State is not normalized (norm {norm:.3e})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex], local_dim: int = 2,
                        normalize: bool = True) -> "StateVector":
        """Build a state from raw amplitudes, inferring the site count."""
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        num_sites = int(round(math.log(amps.size, local_dim)))
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise DimensionError("Cannot normalize the zero vector")
            amps = amps / norm
        return cls(amps, num_sites, local_dim)

    @classmethod
    def basis(cls, num_sites: int, index: int = 0, local_dim: int = 2) -> "StateVector":
        """Computational basis state |index>, |0...0> by default."""
        amps = np.zeros(local_dim ** num_sites, dtype=complex)
        amps[index] = 1.0
        return cls(amps, num_sites, local_dim)

    @classmethod
    def from_bits(cls, bits: str) -> "StateVector":
        """Qubit basis state from a bit string, site 0 first: "10" is |1>|0>."""
        return cls.basis(len(bits), int(bits, 2))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def is_real(self) -> bool:
        return bool(np.max(np.abs(self.amplitudes.imag)) < 1e-12)

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        if other.dim != self.dim:
            raise DimensionError(f"Dimension mismatch: {self.dim} vs {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "num_sites": self.num_sites,
            "local_dim": self.local_dim,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StateVector":
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
        return cls(amps, int(data["num_sites"]), int(data.get("local_dim", 2)))


# ----------------------------------------------------------------------------
# Kernels on raw amplitude arrays
# ----------------------------------------------------------------------------

def apply_matrix(amps: np.ndarray, matrix: np.ndarray, targets: Sequence[int],
                 num_sites: int, local_dim: int = 2) -> np.ndarray:
    """
    Apply a local matrix to the target axes of a flat amplitude vector.

    Args:
        amps: Flat amplitude vector of length local_dim ** num_sites
        matrix: (d^k x d^k) matrix, row index ordered like the targets
        targets: k distinct site indices
        num_sites: Register size
        local_dim: Local dimension d

    Returns:
        New flat amplitude vector
    """
    k = len(targets)
    psi = amps.reshape((local_dim,) * num_sites)
    op = matrix.reshape((local_dim,) * (2 * k))
    psi = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), list(targets)))
    psi = np.moveaxis(psi, list(range(k)), list(targets))
    return psi.reshape(-1)


def apply_gate_array(amps: np.ndarray, gate: Gate, num_sites: int) -> np.ndarray:
    """Apply a qubit gate to a flat amplitude vector."""
    return apply_matrix(amps, gate.matrix(), gate.targets, num_sites, 2)


def run_gates(amps: np.ndarray, gates: Iterable[Gate], num_sites: int) -> np.ndarray:
    """Apply gates in order to a flat amplitude vector."""
    for gate in gates:
        amps = apply_gate_array(amps, gate, num_sites)
    return amps


def _check_gate(state: StateVector, gate: Gate) -> None:
    if state.local_dim != 2:
        raise DimensionError("Gates act on qubit registers only")
    if max(gate.targets) >= state.num_sites:
        raise DimensionError(
            f"Gate {gate.dump()} targets site outside a {state.num_sites}-site state"
        )


# ----------------------------------------------------------------------------
# Public operations
# ----------------------------------------------------------------------------

def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """
    Apply one gate to a state.

    Args:
        state: Input qubit state
        gate: Gate with targets inside the register

    Returns:
        New StateVector; the input is untouched
    """
    _check_gate(state, gate)
    amps = apply_gate_array(state.amplitudes, gate, state.num_sites)
    return StateVector(amps, state.num_sites, 2)


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    """
    Apply a circuit's gates in list order.

    Args:
        state: Input qubit state
        circuit: Circuit on the same number of sites

    Returns:
        New StateVector
    """
    if circuit.num_sites != state.num_sites or state.local_dim != 2:
        raise DimensionError(
            f"Circuit on {circuit.num_sites} qubits applied to a "
            f"{state.num_sites}-site state with local_dim {state.local_dim}"
        )
    if not circuit.gates:
        return state
    amps = run_gates(state.amplitudes, circuit.gates, state.num_sites)
    return StateVector(amps, state.num_sites, 2)


def expectation(state: StateVector, observable: Any) -> float:
    """
    Real expectation value <state|O|state> of a Hermitian observable.

    Args:
        state: Qubit state
        observable: PauliObservable (anything with num_sites and apply())

    Returns:
        Expectation value
    """
    if observable.num_sites != state.num_sites or state.local_dim != 2:
        raise DimensionError(
            f"Observable on {observable.num_sites} qubits, state on {state.num_sites} sites"
        )
    return expectation_array(state.amplitudes, observable)


def expectation_array(amps: np.ndarray, observable: Any) -> float:
    """Expectation value on a raw amplitude vector."""
    value = np.vdot(amps, observable.apply(amps))
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        logger.warning("Expectation has imaginary part %.3e; observable not Hermitian?", value.imag)
    return float(value.real)


def random_state(num_sites: int, seed: int, real_only: bool = False,
                 local_dim: int = 2) -> StateVector:
    """
    Haar-random (or real Gaussian) normalized state.

    Args:
        num_sites: Number of sites (>= 1)
        seed: Seed; the same seed always yields the same state
        real_only: Restrict to real amplitudes
        local_dim: 2 for qubits, 3 for qutrits

    Returns:
        Normalized StateVector
    """
    if num_sites < 1:
        raise DimensionError(f"num_sites must be >= 1, got {num_sites}")
    rng = make_rng(seed, "state", local_dim)
    dim = local_dim ** num_sites
    amps = rng.standard_normal(dim).astype(complex)
    if not real_only:
        amps = amps + 1j * rng.standard_normal(dim)
    amps /= np.linalg.norm(amps)
    return StateVector(amps, num_sites, local_dim)


def random_states(count: int, num_sites: int, seed: int, real_only: bool = False) -> List[StateVector]:
    """count independent random states with seeds derived from one seed."""
    return [random_state(num_sites, int(make_rng(seed, "states", i).integers(2**62)), real_only)
            for i in range(count)]
