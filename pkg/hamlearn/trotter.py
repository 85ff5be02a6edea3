"""
Trotter - Product-formula circuits for U(dt)

Every 2-local Pauli term exp(-i c P dt / r) becomes a Pauli rotation by
angle 2 c dt / r, compiled to a CNOT/CY-conjugated single-qubit rotation:

    Z_i Q_j        CNOT or CY (i -> j), R_Q on j
    P_i Q_j        C_Q (i -> j),       R_P on i      (P, Q in {X, Y})
    P_i Z_j        CY or CNOT (j -> i), R_P on i      (P in {X, Y})

Two-qubit terms are scheduled bond by bond in edge-colour layers (two
layers for a nearest-neighbour chain, so depth does not grow with n), and
identical adjacent CNOT/CY pairs are cancelled.
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple
from collections import defaultdict
from dataclasses import dataclass
import logging

import numpy as np

from .errors import DimensionError
from .pauli import ParamHamiltonian, PauliString, exact_evolution
from .simulator import CONTROLLED_KINDS, Circuit, Gate, StateVector, apply_circuit, run_gates

logger = logging.getLogger(__name__)

ORDERINGS = ("forward", "alternating")

# CY-conjugated terms go first on a bond so CNOT blocks meet and cancel
_ENTANGLER_RANK = {"CY": 0, "CNOT": 1}


def compile_term(term: PauliString, angle: float) -> List[Gate]:
    """
    Gates implementing exp(-i angle P / 2) for a 1- or 2-local Pauli string.

    Args:
        term: Pauli string with support of size 1 or 2
        angle: Rotation angle

    Returns:
        [R_P] for single-site terms, [entangler, rotation, entangler] otherwise
    """
    support = term.support
    if len(support) == 1:
        site = support[0]
        return [Gate("R" + term.ops[site], (site,), angle)]
    if len(support) != 2:
        raise ValueError(f"Term {term.ops} is not 1- or 2-local")
    i, j = support
    p, q = term.ops[i], term.ops[j]
    if p in "XY" and q in "XY":
        control, target = i, j
        entangler = "CNOT" if q == "X" else "CY"
        rotation = Gate("R" + p, (i,), angle)
    elif p == "Z":
        control, target = i, j
        entangler = "CY" if q == "X" else "CNOT"
        rotation = Gate("R" + q, (j,), angle)
    else:
        control, target = j, i
        entangler = "CY" if p == "X" else "CNOT"
        rotation = Gate("R" + p, (i,), angle)
    block = Gate(entangler, (control, target))
    return [block, rotation, block]


def _entangler(term: PauliString) -> Optional[str]:
    gates = compile_term(term, 0.0)
    return gates[0].kind if len(gates) == 3 else None


def edge_colouring(bonds: Sequence[Tuple[int, int]]) -> List[List[Tuple[int, int]]]:
    """Greedy edge colouring: bonds in each returned layer share no site."""
    colour_of: Dict[Tuple[int, int], int] = {}
    used: Dict[int, set] = defaultdict(set)
    for bond in sorted(bonds):
        colour = 0
        while colour in used[bond[0]] or colour in used[bond[1]]:
            colour += 1
        colour_of[bond] = colour
        used[bond[0]].add(colour)
        used[bond[1]].add(colour)
    layers: List[List[Tuple[int, int]]] = [[] for _ in range(max(colour_of.values(), default=-1) + 1)]
    for bond in sorted(bonds):
        layers[colour_of[bond]].append(bond)
    return layers


def schedule_terms(hamiltonian: ParamHamiltonian) -> List[int]:
    """
    Term order of one forward Trotter step.

    Single-site terms first, then two-site terms layer by layer; within a
    bond, CY-conjugated terms precede CNOT-conjugated ones.
    """
    singles: List[int] = []
    by_bond: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for t, term in enumerate(hamiltonian.basis):
        if term.locality == 0:
            raise ValueError("Identity terms only add a global phase; drop them from the basis")
        if term.locality > 2:
            raise ValueError(f"Term {term.ops} is not 2-local")
        if term.locality == 1:
            singles.append(t)
        else:
            by_bond[term.support].append(t)
    singles.sort(key=lambda t: (hamiltonian.basis[t].support, t))
    order = list(singles)
    for layer in edge_colouring(list(by_bond)):
        for bond in layer:
            terms = by_bond[bond]
            order.extend(sorted(terms, key=lambda t: (_ENTANGLER_RANK[_entangler(hamiltonian.basis[t])], t)))
    return order


def cancel_adjacent(items: List[Tuple[Gate, int]]) -> List[Tuple[Gate, int]]:
    """
    Remove pairs of identical CNOT/CY gates with nothing between them on either qubit.

    Args:
        items: (gate, owner) pairs in application order

    Returns:
        Surviving (gate, owner) pairs in order
    """
    kept: List[Tuple[Gate, int]] = []
    alive: List[bool] = []
    stacks: Dict[int, List[int]] = defaultdict(list)
    for gate, owner in items:
        if gate.kind in CONTROLLED_KINDS:
            a, b = gate.targets
            if stacks[a] and stacks[b] and stacks[a][-1] == stacks[b][-1]:
                previous = kept[stacks[a][-1]][0]
                if previous.kind == gate.kind and previous.targets == gate.targets:
                    idx = stacks[a].pop()
                    stacks[b].pop()
                    alive[idx] = False
                    continue
        idx = len(kept)
        kept.append((gate, owner))
        alive.append(True)
        for q in gate.targets:
            stacks[q].append(idx)
    return [item for item, ok in zip(kept, alive) if ok]


@dataclass(frozen=True)
class TrotterPlan:
    """
    Compiled circuit for U(dt) with gate angles tied to Hamiltonian parameters.

    Attributes:
        base_circuit: Circuit implementing U(dt) with steps_per_dt steps
        dt: Time step
        steps_per_dt: Trotter steps r inside one dt
        slot_owner: Parameter index owning each gate's angle, -1 for fixed gates
        num_params: Length of the parameter vector
        ordering: forward or alternating
        cancel_gates: Whether adjacent CNOT/CY pairs were cancelled
    """
    base_circuit: Circuit
    dt: float
    steps_per_dt: int
    slot_owner: Tuple[int, ...]
    num_params: int
    ordering: str = "alternating"
    cancel_gates: bool = True

    @property
    def num_sites(self) -> int:
        return self.base_circuit.num_sites

    @property
    def angle_scale(self) -> float:
        """d(angle)/d(coefficient) for every parameterized slot."""
        return 2.0 * self.dt / self.steps_per_dt

    @property
    def param_to_gate(self) -> Dict[int, Tuple[int, ...]]:
        """Parameter index -> indices of the gates whose angles it sets."""
        mapping: Dict[int, List[int]] = defaultdict(list)
        for slot, owner in enumerate(self.slot_owner):
            if owner >= 0:
                mapping[owner].append(slot)
        return {j: tuple(mapping[j]) for j in range(self.num_params)}

    @property
    def angles(self) -> np.ndarray:
        return np.array([g.angle for g, o in zip(self.base_circuit.gates, self.slot_owner) if o >= 0])

    def bind(self, params: Sequence[float]) -> "TrotterPlan":
        """Same circuit with angles recomputed from a parameter vector."""
        params = np.asarray(params, dtype=float).reshape(-1)
        if params.size != self.num_params:
            raise DimensionError(f"Plan takes {self.num_params} parameters, got {params.size}")
        scale = self.angle_scale
        gates = tuple(
            g.with_angle(scale * params[o]) if o >= 0 else g
            for g, o in zip(self.base_circuit.gates, self.slot_owner)
        )
        return TrotterPlan(Circuit(self.num_sites, gates), self.dt, self.steps_per_dt,
                           self.slot_owner, self.num_params, self.ordering, self.cancel_gates)

    def report(self) -> Dict[str, Any]:
        """Circuit statistics of the base circuit."""
        circuit = self.base_circuit
        return {
            "num_sites": self.num_sites,
            "dt": self.dt,
            "steps_per_dt": self.steps_per_dt,
            "ordering": self.ordering,
            "cancel_gates": self.cancel_gates,
            "gates": len(circuit),
            "two_qubit_gates": circuit.two_qubit_count,
            "depth": circuit.depth(),
            "parameterized_gates": sum(1 for o in self.slot_owner if o >= 0),
            "parameters": self.num_params,
        }


def build_plan(
    hamiltonian: ParamHamiltonian,
    dt: float,
    steps_per_dt: int = 4,
    ordering: str = "alternating",
    cancel_gates: bool = True,
) -> TrotterPlan:
    """
    Compile the Trotterized evolution over one time step.

    Args:
        hamiltonian: 2-local Hamiltonian whose coefficients set the angles
        dt: Time step (> 0)
        steps_per_dt: Trotter steps r per dt (>= 1)
        ordering: "forward" repeats the term order every step, "alternating"
            reverses it on odd steps so consecutive steps form symmetric pairs
        cancel_gates: Cancel adjacent identical CNOT/CY pairs

    Returns:
        TrotterPlan
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if steps_per_dt < 1:
        raise ValueError(f"steps_per_dt must be >= 1, got {steps_per_dt}")
    if ordering not in ORDERINGS:
        raise ValueError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")
    forward = schedule_terms(hamiltonian)
    scale = 2.0 * dt / steps_per_dt
    coeffs = hamiltonian.term_coeffs
    items: List[Tuple[Gate, int]] = []
    for step in range(steps_per_dt):
        order = forward if ordering == "forward" or step % 2 == 0 else forward[::-1]
        for t in order:
            owner = hamiltonian.groups[t]
            for gate in compile_term(hamiltonian.basis[t], scale * coeffs[t]):
                items.append((gate, owner if gate.is_rotation else -1))
    if cancel_gates:
        items = cancel_adjacent(items)
    circuit = Circuit(hamiltonian.num_sites, tuple(g for g, _ in items))
    owners = tuple(o for _, o in items)
    missing = set(range(hamiltonian.num_params)) - set(owners)
    if missing:
        raise ValueError(f"Parameters {sorted(missing)} control no gate")
    plan = TrotterPlan(circuit, float(dt), int(steps_per_dt), owners,
                       hamiltonian.num_params, ordering, cancel_gates)
    logger.debug("Built Trotter plan %s", plan.report())
    return plan


def evolve(plan: TrotterPlan, state: StateVector, k: int) -> StateVector:
    """
    Apply the base circuit k times, i.e. evolve by k * dt.

    Args:
        plan: Trotter plan
        state: Qubit state on plan.num_sites sites
        k: Number of time steps (>= 0)

    Returns:
        Evolved StateVector
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    for _ in range(k):
        state = apply_circuit(state, plan.base_circuit)
    return state


def trotter_unitary(plan: TrotterPlan) -> np.ndarray:
    """Dense matrix of the base circuit, one column per basis state."""
    dim = 2 ** plan.num_sites
    columns = [run_gates(np.eye(dim, dtype=complex)[:, b], plan.base_circuit.gates, plan.num_sites)
               for b in range(dim)]
    return np.stack(columns, axis=1)


def splitting_error(hamiltonian: ParamHamiltonian, t: float, steps: int,
                    ordering: str = "alternating") -> float:
    """
    Operator-norm distance between the Trotter circuit and exp(-iHt).

    Args:
        hamiltonian: Hamiltonian within the dense cap
        t: Evolution time (>= 0)
        steps: Number of Trotter steps over t
        ordering: Term ordering passed to build_plan

    Returns:
        Largest singular value of U_trotter - U_exact
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return 0.0
    exact = exact_evolution(hamiltonian, t)
    plan = build_plan(hamiltonian, t, steps, ordering=ordering, cancel_gates=False)
    return float(np.linalg.norm(trotter_unitary(plan) - exact, 2))
