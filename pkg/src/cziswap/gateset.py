"""Exact gate algebra for the CZ / iSWAP / SWAP gate set.

Two-qubit matrices use the basis order |00>, |01>, |10>, |11> with the first
label on the first target. Registers may mix two- and three-level sites; a
gate defined on qubits always acts on levels {0, 1} of its targets and as the
identity on every other level.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

# Sign of the virtual-Z phase: Z(phi) = diag(1, exp(1j * VZ_SIGN * phi)).
# Flipping it mirrors every Ramsey fixture.
VZ_SIGN = +1

TAU_1QB = 20e-9
TAU_CZ = 890e-9
TAU_ISWAP = 640e-9

UNITARY_TOL = 1e-12


class GateError(ValueError):
    pass


class GateKind(str, enum.Enum):
    CZ = "CZ"
    ISWAP = "iSWAP"
    SWAP = "SWAP"
    CNOT = "CNOT"
    BSWAP = "bSWAP"
    H = "H"
    SQRT_X = "SqrtX"
    X = "X"
    S_DAGGER = "SDagger"
    VIRTUAL_Z = "VirtualZ"
    DELAY = "Delay"

    @property
    def arity(self) -> int:
        return 2 if self in _TWO_QUBIT else 1


_TWO_QUBIT = {GateKind.CZ, GateKind.ISWAP, GateKind.SWAP, GateKind.CNOT, GateKind.BSWAP}

_S2 = 1.0 / np.sqrt(2.0)

_FIXED = {
    GateKind.CZ: np.diag([1, 1, 1, -1]).astype(complex),
    GateKind.ISWAP: np.array([[1, 0, 0, 0],
                              [0, 0, 1j, 0],
                              [0, 1j, 0, 0],
                              [0, 0, 0, 1]], dtype=complex),
    GateKind.SWAP: np.array([[1, 0, 0, 0],
                             [0, 0, 1, 0],
                             [0, 1, 0, 0],
                             [0, 0, 0, 1]], dtype=complex),
    # control on the first target
    GateKind.CNOT: np.array([[1, 0, 0, 0],
                             [0, 1, 0, 0],
                             [0, 0, 0, 1],
                             [0, 0, 1, 0]], dtype=complex),
    # two-photon |00> <-> |11> exchange; provided as a constant only
    GateKind.BSWAP: np.array([[0, 0, 0, 1j],
                              [0, 1, 0, 0],
                              [0, 0, 1, 0],
                              [1j, 0, 0, 0]], dtype=complex),
    GateKind.H: _S2 * np.array([[1, 1], [1, -1]], dtype=complex),
    GateKind.SQRT_X: 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]),
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.S_DAGGER: np.diag([1, -1j]).astype(complex),
    GateKind.DELAY: np.eye(2, dtype=complex),
}

DEFAULT_DURATION = {
    GateKind.CZ: TAU_CZ,
    GateKind.ISWAP: TAU_ISWAP,
    GateKind.SWAP: 0.0,
    GateKind.CNOT: 0.0,
    GateKind.BSWAP: 0.0,
    GateKind.H: TAU_1QB,
    GateKind.SQRT_X: TAU_1QB,
    GateKind.X: TAU_1QB,
    GateKind.S_DAGGER: 0.0,
    GateKind.VIRTUAL_Z: 0.0,
    GateKind.DELAY: 0.0,
}


def virtual_z(phi: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * VZ_SIGN * phi)])


def standard_gate(kind: GateKind | str, phase: float | None = None) -> np.ndarray:
    """Exact matrix of a named gate; ``phase`` only for VirtualZ."""
    try:
        kind = GateKind(kind)
    except ValueError:
        raise GateError(f"unknown gate kind {kind!r}") from None
    if kind is GateKind.VIRTUAL_Z:
        return virtual_z(0.0 if phase is None else phase)
    if phase is not None:
        raise GateError(f"{kind.value} takes no phase")
    return _FIXED[kind].copy()


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return bool(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() <= tol)


def _apply_on_targets(tensor: np.ndarray, op: np.ndarray, targets: Sequence[int],
                      dims: Sequence[int]) -> np.ndarray:
    """Contract ``op`` (acting on the joint target space) into the leading axes."""
    nt = len(targets)
    tdims = [dims[t] for t in targets]
    op_t = op.reshape(tdims + tdims)
    moved = np.tensordot(op_t, tensor, axes=(list(range(nt, 2 * nt)), list(targets)))
    return np.moveaxis(moved, list(range(nt)), list(targets))


def _lift(u: np.ndarray, tdims: Sequence[int]) -> np.ndarray:
    """Extend a qubit gate to the target sites' level structure (identity off {0,1})."""
    nq = len(tdims)
    if u.shape != (2**nq, 2**nq):
        raise GateError(f"expected a {2**nq}x{2**nq} qubit gate, got {u.shape}")
    if all(d == 2 for d in tdims):
        return u
    size = int(np.prod(tdims))
    full = np.eye(size, dtype=complex)
    sub = []
    for bits in np.ndindex(*([2] * nq)):
        sub.append(int(np.ravel_multi_index(bits, tdims)))
    full[np.ix_(sub, sub)] = u
    return full


def embed(u: np.ndarray, targets: int | Sequence[int], register: Sequence[int]) -> np.ndarray:
    """Matrix of qubit gate ``u`` acting on ``targets`` of ``register``."""
    targets = (targets,) if isinstance(targets, (int, np.integer)) else tuple(targets)
    register = tuple(int(d) for d in register)
    if len(set(targets)) != len(targets) or any(not 0 <= t < len(register) for t in targets):
        raise GateError(f"bad targets {targets} for register {register}")
    if any(register[t] < 2 for t in targets):
        raise GateError("target sites need at least two levels")
    op = _lift(np.asarray(u, dtype=complex), [register[t] for t in targets])
    dim = int(np.prod(register))
    eye = np.eye(dim, dtype=complex).reshape(list(register) + [dim])
    return _apply_on_targets(eye, op, targets, register).reshape(dim, dim)


def embed_qutrit(u: np.ndarray, site: int | Sequence[int],
                 register: Sequence[int] = (3, 3)) -> np.ndarray:
    """Embed a qubit gate into a register of three-level transmons."""
    return embed(u, site, register)


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    targets: tuple
    phase: float = 0.0
    duration: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        targets = (self.targets,) if isinstance(self.targets, (int, np.integer)) else tuple(self.targets)
        object.__setattr__(self, "targets", tuple(int(t) for t in targets))
        if len(self.targets) != self.kind.arity:
            raise GateError(f"{self.kind.value} needs {self.kind.arity} target(s)")
        if len(set(self.targets)) != len(self.targets):
            raise GateError("targets must be distinct")
        if self.duration is None:
            object.__setattr__(self, "duration", DEFAULT_DURATION[self.kind])
        if self.kind in (GateKind.VIRTUAL_Z, GateKind.S_DAGGER) and self.duration != 0:
            raise GateError(f"{self.kind.value} is a zero-duration frame change")
        if self.duration < 0:
            raise GateError("negative duration")

    def matrix(self) -> np.ndarray:
        if self.kind is GateKind.VIRTUAL_Z:
            return virtual_z(self.phase)
        return standard_gate(self.kind)


@dataclass
class Circuit:
    register: tuple = (2, 2)
    ops: list = field(default_factory=list)

    def __post_init__(self):
        self.register = tuple(int(d) for d in self.register)

    def add(self, kind, *targets, phase: float = 0.0, duration: float | None = None) -> "Circuit":
        op = GateOp(GateKind(kind), tuple(targets), phase, duration)
        if any(t >= len(self.register) for t in op.targets):
            raise GateError(f"target out of range for register {self.register}")
        self.ops.append(op)
        return self

    def extend(self, other: "Circuit") -> "Circuit":
        if other.register != self.register:
            raise GateError("register mismatch")
        return Circuit(self.register, list(self.ops) + list(other.ops))

    @property
    def duration(self) -> float:
        return float(sum(op.duration for op in self.ops))

    @property
    def dim(self) -> int:
        return int(np.prod(self.register))


def op_matrix(op: GateOp, register: Sequence[int]) -> np.ndarray:
    return embed(op.matrix(), op.targets, register)


def compose(circuit: Circuit) -> np.ndarray:
    """Unitary of the circuit; later operations multiply from the left."""
    u = np.eye(circuit.dim, dtype=complex)
    for op in circuit.ops:
        if op.kind is GateKind.DELAY:
            continue
        u = op_matrix(op, circuit.register) @ u
    return u


def apply_circuit(circuit: Circuit, state: np.ndarray) -> np.ndarray:
    """Statevector simulation without forming the full unitary."""
    dims = list(circuit.register)
    psi = np.asarray(state, dtype=complex).reshape(dims)
    for op in circuit.ops:
        if op.kind is GateKind.DELAY:
            continue
        tdims = [dims[t] for t in op.targets]
        psi = _apply_on_targets(psi, _lift(op.matrix(), tdims), op.targets, dims)
    return psi.reshape(-1)


def basis_state(labels: Sequence[int], register: Sequence[int]) -> np.ndarray:
    psi = np.zeros(int(np.prod(register)), dtype=complex)
    psi[np.ravel_multi_index(tuple(labels), tuple(register))] = 1.0
    return psi


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """min over theta of max |u - exp(i theta) v|."""
    u = np.asarray(u)
    v = np.asarray(v)
    overlap = np.vdot(v, u)
    theta0 = float(np.angle(overlap)) if abs(overlap) > 0 else 0.0

    def cost(theta):
        return float(np.abs(u - np.exp(1j * theta) * v).max())

    res = minimize_scalar(cost, bounds=(theta0 - 0.5, theta0 + 0.5), method="bounded",
                          options={"xatol": 1e-12})
    return min(cost(theta0), float(res.fun))


def schmidt_coefficients(state: np.ndarray, dims: Sequence[int] = (2, 2)) -> np.ndarray:
    m = np.asarray(state).reshape(dims[0], -1)
    return np.linalg.svd(m, compute_uv=False)


def schmidt_rank(state: np.ndarray, dims: Sequence[int] = (2, 2), tol: float = 1e-10) -> int:
    return int(np.sum(schmidt_coefficients(state, dims) > tol))


def cnot(control: int, target: int) -> np.ndarray:
    """CNOT on a two-qubit register; CNOT_ct in the |q0 q1> basis."""
    return embed(_FIXED[GateKind.CNOT], (control, target), (2, 2))


def swap_short_form() -> Circuit:
    """iSWAP, then CZ, then S-dagger on both qubits: exactly SWAP."""
    return (Circuit((2, 2)).add(GateKind.ISWAP, 0, 1).add(GateKind.CZ, 0, 1)
            .add(GateKind.S_DAGGER, 0).add(GateKind.S_DAGGER, 1))


def swap_hadamard_form() -> Circuit:
    """Short form straddled by H on both qubits; SWAP commutes with H (x) H."""
    c = Circuit((2, 2)).add(GateKind.H, 0).add(GateKind.H, 1)
    c = c.extend(swap_short_form())
    return c.add(GateKind.H, 0).add(GateKind.H, 1)


@dataclass
class IdentityCheck:
    name: str
    deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tol


@dataclass
class VerificationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "checks": [{"name": c.name, "max_deviation": c.deviation,
                            "tol": c.tol, "passed": c.passed} for c in self.checks]}


def _maxdev(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max())


def verify_swap_decomposition(tol: float = UNITARY_TOL, perturb: float = 0.0) -> VerificationReport:
    """Check every decomposition identity behind the composite SWAP.

    ``perturb`` adds a real offset to one entry of the CZ matrix, for
    exercising the failure path.
    """
    cz = standard_gate(GateKind.CZ)
    if perturb:
        cz[3, 3] += perturb
    isw = standard_gate(GateKind.ISWAP)
    swap = standard_gate(GateKind.SWAP)
    sdg2 = np.kron(standard_gate(GateKind.S_DAGGER), standard_gate(GateKind.S_DAGGER))
    h = standard_gate(GateKind.H)
    eye2 = np.eye(2)
    ih = np.kron(eye2, h)
    chain = cnot(0, 1) @ cnot(1, 0) @ cnot(0, 1)
    checks = [
        IdentityCheck("sdg_sdg_cz_iswap_eq_swap", _maxdev(sdg2 @ cz @ isw, swap), tol),
        IdentityCheck("cz_iswap_commute", _maxdev(cz @ isw, isw @ cz), tol),
        IdentityCheck("three_cnot_eq_swap", _maxdev(chain, swap), tol),
        IdentityCheck("hh_eq_identity", _maxdev(h @ h, eye2), tol),
        IdentityCheck("cnot_eq_h_cz_h", _maxdev(cnot(0, 1), ih @ cz @ ih), tol),
    ]
    return VerificationReport(checks)


def local_phase_frame(circuit: Circuit,
                      per_site_phases: Sequence[float] | Mapping[GateKind | str, Sequence[float]]
                      ) -> Circuit:
    """Insert VirtualZ compensation after every two-qubit gate.

    ``per_site_phases`` holds one phase per register site, either for all
    two-qubit gates or keyed by gate kind (kinds missing from the mapping get
    no compensation).
    """
    nsites = len(circuit.register)
    if isinstance(per_site_phases, Mapping):
        table = {GateKind(k): tuple(v) for k, v in per_site_phases.items()}
    else:
        table = {k: tuple(per_site_phases) for k in _TWO_QUBIT}
    for phases in table.values():
        if len(phases) != nsites:
            raise GateError(f"need {nsites} phases, got {len(phases)}")
    out = Circuit(circuit.register)
    for op in circuit.ops:
        out.ops.append(op)
        if op.kind.arity == 2 and op.kind in table:
            for site, phi in enumerate(table[op.kind]):
                out.ops.append(GateOp(GateKind.VIRTUAL_Z, (site,), float(phi)))
    return out
