"""
Oracle - Brute-force dense linear algebra

Explicit Kronecker-product matrices for gates and circuits, a Taylor-series
matrix exponential and an eigenvalue-based trace distance. Nothing in the
simulation path calls these; they exist to cross-check it.
"""

from typing import Sequence
import itertools
import math

import numpy as np

from .simulator import PAULI_MATRICES, Circuit, Gate, StateVector

DENSE_DIM_CAP = 4096


def kron_chain(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Kronecker product of a list of matrices, first factor most significant."""
    result = np.eye(1, dtype=complex)
    for op in ops:
        result = np.kron(result, op)
    return result


def embed(local: np.ndarray, targets: Sequence[int], num_sites: int) -> np.ndarray:
    """
    Embed a one- or two-qubit matrix into the full register.

    The local matrix is expanded in the Pauli product basis and every term
    is written out as an explicit Kronecker chain.
    """
    labels = "IXYZ"
    k = len(targets)
    full = np.zeros((2 ** num_sites, 2 ** num_sites), dtype=complex)
    for combo in itertools.product(labels, repeat=k):
        local_pauli = kron_chain([PAULI_MATRICES[c] for c in combo])
        coeff = np.trace(local_pauli.conj().T @ local) / 2 ** k
        if abs(coeff) < 1e-15:
            continue
        ops = [PAULI_MATRICES["I"]] * num_sites
        for site, c in zip(targets, combo):
            ops[site] = PAULI_MATRICES[c]
        full += coeff * kron_chain(ops)
    return full


def gate_unitary(gate: Gate, num_sites: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of one gate."""
    return embed(gate.matrix(), gate.targets, num_sites)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Composed dense unitary of a circuit (later gates multiply on the left)."""
    unitary = np.eye(2 ** circuit.num_sites, dtype=complex)
    for gate in circuit.gates:
        unitary = gate_unitary(gate, circuit.num_sites) @ unitary
    return unitary


def dense_expectation(amps: np.ndarray, matrix: np.ndarray) -> float:
    """<psi|M|psi> as a dense quadratic form."""
    return float(np.real(np.conj(amps) @ matrix @ amps))


def taylor_expm(matrix: np.ndarray, terms: int = 30) -> np.ndarray:
    """exp(matrix) by scaling and squaring around a truncated Taylor series."""
    norm = np.linalg.norm(matrix, 1)
    squarings = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    scaled = matrix / (2 ** squarings)
    result = np.eye(matrix.shape[0], dtype=complex)
    term = np.eye(matrix.shape[0], dtype=complex)
    for n in range(1, terms + 1):
        term = term @ scaled / n
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def density_trace_distance(a: StateVector, b: StateVector) -> float:
    """1/2 ||rho - sigma||_1 from the eigenvalues of the difference of projectors."""
    rho = np.outer(a.amplitudes, a.amplitudes.conj())
    sigma = np.outer(b.amplitudes, b.amplitudes.conj())
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))
