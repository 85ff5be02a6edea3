"""
Pauli Model - Pauli strings, observables and parameterized Hamiltonians

Provides:
- PauliString / PauliObservable: the measurable surface
- ParamHamiltonian: coefficient vector over an ordered term basis, with an
  optional parameter-to-term map for families that share couplings
- build_family: the built-in Hamiltonian families
- dense_matrix / exact_evolution: ground-truth dynamics by eigendecomposition
"""

from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
from dataclasses import dataclass
from functools import cached_property, lru_cache
import itertools
import math

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionError
from .seeding import uniform_coeffs
from .simulator import PAULI_MATRICES, StateVector, expectation

PAULI_LABELS = "IXYZ"
DENSE_DIM_CAP = 4096

FAMILIES = (
    "generic-2local",
    "zz-xx",
    "tfim-inhomogeneous",
    "tfim-homogeneous",
    "heisenberg-xyz",
    "custom",
)


@lru_cache(maxsize=16)
def _basis_indices(num_sites: int) -> np.ndarray:
    idx = np.arange(2 ** num_sites)
    idx.setflags(write=False)
    return idx


@dataclass(frozen=True)
class PauliString:
    """
    Tensor product of single-site Paulis, site 0 first.

    Attributes:
        ops: One symbol from I, X, Y, Z per site, e.g. "IZZIX"
    """
    ops: str

    def __post_init__(self):
        ops = self.ops.upper()
        if not ops or any(c not in PAULI_LABELS for c in ops):
            raise ValueError(f"Invalid Pauli string: {self.ops!r}")
        object.__setattr__(self, "ops", ops)

    @classmethod
    def from_sites(cls, num_sites: int, sites: Mapping[int, str]) -> "PauliString":
        """Identity everywhere except the given {site: symbol} entries."""
        ops = ["I"] * num_sites
        for site, symbol in sites.items():
            if not 0 <= site < num_sites:
                raise DimensionError(f"Site {site} outside a {num_sites}-site register")
            ops[site] = symbol
        return cls("".join(ops))

    def __str__(self) -> str:
        return self.ops

    @property
    def num_sites(self) -> int:
        return len(self.ops)

    @property
    def support(self) -> Tuple[int, ...]:
        """Sites where the string acts nontrivially."""
        return tuple(i for i, c in enumerate(self.ops) if c != "I")

    @property
    def locality(self) -> int:
        return len(self.support)

    @cached_property
    def _masks(self) -> Tuple[int, int, int]:
        n = self.num_sites
        x_mask = z_mask = 0
        for site, c in enumerate(self.ops):
            bit = 1 << (n - 1 - site)
            if c in "XY":
                x_mask |= bit
            if c in "ZY":
                z_mask |= bit
        return x_mask, z_mask, self.ops.count("Y")

    def _action(self) -> Tuple[np.ndarray, np.ndarray]:
        """Source index and phase so that (P v)[c] = phase[c] * v[source[c]]."""
        x_mask, z_mask, num_y = self._masks
        idx = _basis_indices(self.num_sites)
        source = idx ^ x_mask
        parity = np.zeros_like(idx)
        for site, c in enumerate(self.ops):
            if c in "ZY":
                parity ^= (source >> (self.num_sites - 1 - site)) & 1
        phase = (1j ** num_y) * (1 - 2 * parity)
        return source, phase

    def apply(self, amps: np.ndarray) -> np.ndarray:
        """P applied to a flat qubit amplitude vector."""
        if amps.size != 2 ** self.num_sites:
            raise DimensionError(f"{self.ops} acts on {2 ** self.num_sites} amplitudes, got {amps.size}")
        source, phase = self._action()
        return phase * amps[source]

    def matrix(self) -> np.ndarray:
        """Dense Kronecker-product matrix."""
        result = np.eye(1, dtype=complex)
        for c in self.ops:
            result = np.kron(result, PAULI_MATRICES[c])
        return result

    def commutes_with(self, other: "PauliString") -> bool:
        clashes = sum(1 for a, b in zip(self.ops, other.ops) if a != "I" and b != "I" and a != b)
        return clashes % 2 == 0


@dataclass(frozen=True)
class PauliObservable:
    """
    Real-weighted sum of Pauli strings (Hermitian by construction).

    Attributes:
        terms: (weight, PauliString) pairs on a common register
        label: Short human-readable name used in files and reports
    """
    terms: Tuple[Tuple[float, PauliString], ...]
    label: str = ""

    def __post_init__(self):
        terms = tuple((float(w), p if isinstance(p, PauliString) else PauliString(p))
                      for w, p in self.terms)
        if not terms:
            raise ValueError("An observable needs at least one term")
        if any(not math.isfinite(w) for w, _ in terms):
            raise ConfigError("Observable weights must be finite")
        if len({p.num_sites for _, p in terms}) != 1:
            raise DimensionError("All observable terms must act on the same register")
        object.__setattr__(self, "terms", terms)
        if not self.label:
            object.__setattr__(self, "label", "+".join(
                (p.ops if w == 1.0 else f"{w:g}*{p.ops}") for w, p in terms))

    @classmethod
    def from_string(cls, ops: str, weight: float = 1.0, label: str = "") -> "PauliObservable":
        return cls(((weight, PauliString(ops)),), label)

    @classmethod
    def from_label(cls, label: str, num_sites: int) -> "PauliObservable":
        """
        Named observable.

        Args:
            label: XM / YM / ZM (magnetization), XXX / ZZZ (nearest-neighbour
                3-point correlator sums), or a raw Pauli string of length num_sites
            num_sites: Register size

        Returns:
            PauliObservable
        """
        if len(label) == 2 and label[1] == "M" and label[0] in "XYZ":
            return magnetization(label[0], num_sites)
        if label in ("XXX", "YYY", "ZZZ") and num_sites >= 3:
            return nearest_neighbour_sum(label[0], 3, num_sites, label)
        if len(label) == num_sites and all(c in PAULI_LABELS for c in label.upper()):
            return cls.from_string(label, label=label.upper())
        raise ConfigError(f"Unknown observable label {label!r} for {num_sites} sites")

    @property
    def num_sites(self) -> int:
        return self.terms[0][1].num_sites

    @property
    def bound(self) -> float:
        """Sum of |weights|, an upper bound on |<O>|."""
        return float(sum(abs(w) for w, _ in self.terms))

    @property
    def strings(self) -> Tuple[PauliString, ...]:
        return tuple(p for _, p in self.terms)

    def apply(self, amps: np.ndarray) -> np.ndarray:
        out = np.zeros_like(amps, dtype=complex)
        for w, p in self.terms:
            out += w * p.apply(amps)
        return out

    def expectation(self, state: StateVector) -> float:
        return expectation(state, self)

    def matrix(self) -> np.ndarray:
        return sum(w * p.matrix() for w, p in self.terms)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "pauli",
            "label": self.label,
            "terms": [[w, p.ops] for w, p in self.terms],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PauliObservable":
        return cls(tuple((float(w), PauliString(s)) for w, s in data["terms"]), data.get("label", ""))


def magnetization(axis: str, num_sites: int) -> PauliObservable:
    """Sum over sites of sigma_axis, the X^M / Z^M observables."""
    if axis not in "XYZ" or len(axis) != 1:
        raise ValueError(f"Magnetization axis must be X, Y or Z, got {axis!r}")
    terms = tuple((1.0, PauliString.from_sites(num_sites, {p: axis})) for p in range(num_sites))
    return PauliObservable(terms, f"{axis}M")


def nearest_neighbour_sum(axis: str, span: int, num_sites: int, label: str = "") -> PauliObservable:
    """Sum of span-point correlators axis^p ... axis^(p+span-1) along the chain."""
    terms = tuple(
        (1.0, PauliString.from_sites(num_sites, {p + q: axis for q in range(span)}))
        for p in range(num_sites - span + 1)
    )
    return PauliObservable(terms, label or axis * span)


def correlator(num_sites: int, sites: Sequence[int], axes: str) -> PauliObservable:
    """Single Pauli-string correlator, e.g. correlator(5, (0, 3), "ZZ")."""
    ps = PauliString.from_sites(num_sites, dict(zip(sites, axes)))
    return PauliObservable(((1.0, ps),), ps.ops)


@dataclass(frozen=True, eq=False)
class ParamHamiltonian:
    """
    Hamiltonian H = sum_t coeffs[groups[t]] * basis[t].

    Attributes:
        basis: Ordered, duplicate-free Pauli term basis
        coeffs: Learnable parameter vector
        family_tag: Which built-in family produced the basis
        groups: Parameter index of every basis term; identity when empty
    """
    basis: Tuple[PauliString, ...]
    coeffs: np.ndarray
    family_tag: str = "custom"
    groups: Tuple[int, ...] = ()

    def __post_init__(self):
        basis = tuple(p if isinstance(p, PauliString) else PauliString(p) for p in self.basis)
        if not basis:
            raise ValueError("Hamiltonian basis is empty")
        if self.family_tag not in FAMILIES:
            raise ConfigError(f"Unknown family tag {self.family_tag!r}")
        if len({p.num_sites for p in basis}) != 1:
            raise DimensionError("All Hamiltonian terms must act on the same register")
        if len({p.ops for p in basis}) != len(basis):
            raise ValueError("Hamiltonian basis contains duplicate strings")
        if self.family_tag != "custom" and any(p.locality > 2 for p in basis):
            raise ValueError("Built-in families are at most 2-local")
        groups = tuple(int(g) for g in self.groups) or tuple(range(len(basis)))
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        if len(groups) != len(basis):
            raise DimensionError(f"{len(groups)} group entries for {len(basis)} terms")
        if set(groups) != set(range(coeffs.size)):
            raise DimensionError(
                f"Groups {sorted(set(groups))} must cover every one of {coeffs.size} parameters"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ConfigError("Hamiltonian coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "groups", groups)

    @property
    def num_sites(self) -> int:
        return self.basis[0].num_sites

    @property
    def num_params(self) -> int:
        return self.coeffs.size

    @property
    def num_terms(self) -> int:
        return len(self.basis)

    @property
    def term_coeffs(self) -> np.ndarray:
        """Coefficient of every basis term after expanding shared parameters."""
        return self.coeffs[list(self.groups)]

    def param_terms(self, param: int) -> List[int]:
        """Indices of the basis terms controlled by one parameter."""
        return [t for t, g in enumerate(self.groups) if g == param]

    def with_coeffs(self, coeffs: Sequence[float]) -> "ParamHamiltonian":
        """Same basis and grouping with a new parameter vector."""
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        if coeffs.size != self.num_params:
            raise DimensionError(f"Expected {self.num_params} parameters, got {coeffs.size}")
        return ParamHamiltonian(self.basis, coeffs, self.family_tag, self.groups)

    def same_model(self, other: "ParamHamiltonian") -> bool:
        """Whether two Hamiltonians share basis and grouping."""
        return (tuple(p.ops for p in self.basis) == tuple(p.ops for p in other.basis)
                and self.groups == other.groups)

    def to_observable(self) -> PauliObservable:
        return PauliObservable(tuple(zip(self.term_coeffs.tolist(), self.basis)), "H")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family_tag,
            "num_sites": self.num_sites,
            "basis": [p.ops for p in self.basis],
            "coeffs": self.coeffs.tolist(),
            "groups": list(self.groups),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ParamHamiltonian":
        try:
            ham = cls(
                tuple(PauliString(s) for s in data["basis"]),
                np.asarray(data["coeffs"], dtype=float),
                data.get("family", "custom"),
                tuple(data.get("groups", ())),
            )
        except KeyError as e:
            raise ConfigError(f"Hamiltonian record missing field {e}") from e
        if "num_sites" in data and int(data["num_sites"]) != ham.num_sites:
            raise DimensionError(f"num_sites {data['num_sites']} does not match basis")
        return ham


# ----------------------------------------------------------------------------
# Families
# ----------------------------------------------------------------------------

def _family_basis(family_tag: str, n: int) -> Tuple[List[PauliString], List[int]]:
    pairs = list(itertools.combinations(range(n), 2))
    bonds = [(i, i + 1) for i in range(n - 1)]
    if family_tag == "generic-2local":
        basis = [PauliString.from_sites(n, {i: b, j: g})
                 for i, j in pairs for b in "XYZ" for g in "XYZ"]
        return basis, list(range(len(basis)))
    if family_tag == "zz-xx":
        basis = [PauliString.from_sites(n, {i: "Z", j: "Z"}) for i, j in pairs]
        basis += [PauliString.from_sites(n, {i: "X", j: "X"}) for i, j in pairs]
        return basis, list(range(len(basis)))
    if family_tag in ("tfim-inhomogeneous", "tfim-homogeneous"):
        basis = [PauliString.from_sites(n, {i: "X"}) for i in range(n)]
        basis += [PauliString.from_sites(n, {i: "Z", j: "Z"}) for i, j in bonds]
        if family_tag == "tfim-homogeneous":
            return basis, [0] * n + [1] * len(bonds)
        return basis, list(range(len(basis)))
    if family_tag == "heisenberg-xyz":
        basis, groups = [], []
        for i, j in bonds:
            for axis, group in (("X", 0), ("Y", 1), ("Z", 2)):
                basis.append(PauliString.from_sites(n, {i: axis, j: axis}))
                groups.append(group)
        return basis, groups
    raise ConfigError(f"Unknown family tag {family_tag!r}; expected one of {FAMILIES}")


def build_family(
    family_tag: str,
    num_sites: int,
    seed: Optional[int] = None,
    coeffs: Optional[Sequence[float]] = None,
    basis: Optional[Sequence[str]] = None,
    groups: Optional[Sequence[int]] = None,
) -> ParamHamiltonian:
    """
    Build one of the Hamiltonian families.

    Args:
        family_tag: generic-2local, zz-xx, tfim-inhomogeneous, tfim-homogeneous,
            heisenberg-xyz or custom
        num_sites: Number of qubits (>= 2)
        seed: Seed for uniform [-1, 1] coefficients (ignored when coeffs given)
        coeffs: Explicit parameter vector
        basis: Pauli strings (custom family only)
        groups: Parameter index per term (custom family only)

    Returns:
        ParamHamiltonian
    """
    if num_sites < 2:
        raise DimensionError(f"Hamiltonian families need num_sites >= 2, got {num_sites}")
    if family_tag == "custom":
        if not basis:
            raise ConfigError("The custom family needs an explicit basis")
        terms = [PauliString(s) for s in basis]
        if any(p.num_sites != num_sites for p in terms):
            raise DimensionError(f"Custom basis strings must have length {num_sites}")
        group_list = list(groups) if groups else list(range(len(terms)))
    else:
        terms, group_list = _family_basis(family_tag, num_sites)
    num_params = max(group_list) + 1
    if coeffs is None:
        values = uniform_coeffs(num_params, 0 if seed is None else seed, family_tag, num_sites)
    else:
        values = np.asarray(coeffs, dtype=float)
        if values.size != num_params:
            raise DimensionError(f"{family_tag} on {num_sites} sites takes {num_params} coefficients")
    return ParamHamiltonian(tuple(terms), values, family_tag, tuple(group_list))


# ----------------------------------------------------------------------------
# Dense matrices and exact dynamics
# ----------------------------------------------------------------------------

def _check_cap(num_sites: int) -> int:
    dim = 2 ** num_sites
    if dim > DENSE_DIM_CAP:
        raise DimensionError(f"Dense dimension {dim} exceeds cap {DENSE_DIM_CAP}")
    return dim


def dense_matrix(hamiltonian: ParamHamiltonian) -> np.ndarray:
    """
    Dense Hermitian matrix sum_t c_t P_t.

    Each Pauli string is a signed permutation, so the matrix is filled
    entry-wise instead of through Kronecker products.
    """
    dim = _check_cap(hamiltonian.num_sites)
    matrix = np.zeros((dim, dim), dtype=complex)
    rows = _basis_indices(hamiltonian.num_sites)
    for coeff, term in zip(hamiltonian.term_coeffs, hamiltonian.basis):
        if coeff == 0.0:
            continue
        source, phase = term._action()
        # (P e_b)[c] = phase[c] where source[c] == b
        matrix[rows, source] += coeff * phase
    return matrix


class ExactPropagator:
    """
    exp(-iHt) from one eigendecomposition of the dense Hamiltonian.

    Attributes:
        energies: Eigenvalues of H
        vectors: Orthonormal eigenvectors (columns)
    """

    def __init__(self, hamiltonian: ParamHamiltonian):
        self.num_sites = hamiltonian.num_sites
        self.energies, self.vectors = scipy.linalg.eigh(dense_matrix(hamiltonian))

    def unitary(self, t: float) -> np.ndarray:
        if not math.isfinite(t):
            raise ConfigError(f"Time must be finite, got {t}")
        return (self.vectors * np.exp(-1j * self.energies * t)) @ self.vectors.conj().T

    def evolve(self, amps: np.ndarray, t: float) -> np.ndarray:
        """exp(-iHt) applied to a flat amplitude vector."""
        return self.vectors @ (np.exp(-1j * self.energies * t) * (self.vectors.conj().T @ amps))


def exact_evolution(hamiltonian: ParamHamiltonian, t: float) -> np.ndarray:
    """
    Dense unitary U(t) = exp(-iHt).

    Args:
        hamiltonian: Hamiltonian within the dense cap
        t: Finite time

    Returns:
        Dense unitary matrix
    """
    return ExactPropagator(hamiltonian).unitary(t)
