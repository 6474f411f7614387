"""Three-transmon Hamiltonian (qubit 1, qubit 2, coupler) in angular units.

Sites are ordered (q1, q2, coupler), so the bare Fock state |q1 q2 c>
has flat index ``(q1 * L + q2) * L + c``. With the coupler in its ground
state the nine qubit states come out in the lexicographic order
|00>, |01>, ..., |22>.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .params import ConfigError, DeviceParams

TWO_PI = 2.0 * np.pi


def coupler_frequency(phi, params: DeviceParams):
    """Symmetric-SQUID coupler frequency in Hz at flux ``phi`` (units of Phi0)."""
    # cos(pi phi) written as sin(pi (1/2 - |phi|)) so the frustration point is exactly zero
    phi = np.abs(np.asarray(phi, dtype=float))
    return params.f_c0_hz * np.sqrt(np.abs(np.sin(np.pi * (0.5 - phi))))


def _lowering(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1)


def _site_op(op: np.ndarray, site: int, levels: int) -> np.ndarray:
    eye = np.eye(levels)
    mats = [eye, eye, eye]
    mats[site] = op
    return np.kron(np.kron(mats[0], mats[1]), mats[2])


def build_hamiltonian(params: DeviceParams, phi: float) -> np.ndarray:
    """H / hbar in rad/s on the (levels)^3 product space at coupler flux ``phi``.

    Direct qubit-qubit coupling is neglected.
    """
    if params.f01_q1_hz <= 0 or params.f01_q2_hz <= 0:
        raise ConfigError("qubit frequencies must be positive")
    L = params.levels
    a = _lowering(L)
    a1, a2, b = (_site_op(a, s, L) for s in range(3))
    n1, n2, nc = (op.T @ op for op in (a1, a2, b))
    eye = np.eye(L**3)
    wc = coupler_frequency(phi, params)
    h = (params.f01_q1_hz * n1 + 0.5 * params.eta_q1_hz * n1 @ (n1 - eye)
         + params.f01_q2_hz * n2 + 0.5 * params.eta_q2_hz * n2 @ (n2 - eye)
         + wc * nc + 0.5 * params.eta_c_hz * nc @ (nc - eye)
         + params.g_q1c_hz * (a1 + a1.T) @ (b + b.T)
         + params.g_q2c_hz * (a2 + a2.T) @ (b + b.T))
    return TWO_PI * h


def bare_index(q1: int, q2: int, c: int = 0, levels: int = 3) -> int:
    return (q1 * levels + q2) * levels + c


class DeviceModel:
    """Idle-bias Hamiltonian, its eigenbasis, and dressed-state bookkeeping."""

    def __init__(self, params: DeviceParams):
        self.params = params
        self.levels = params.levels
        self.dim = self.levels**3
        self.h_idle = build_hamiltonian(params, params.phi_bias)
        self.omega_bias = TWO_PI * float(coupler_frequency(params.phi_bias, params))
        occ = np.arange(self.levels, dtype=float)
        # diagonal of b^dagger b; the only operator the flux drive modulates
        self.coupler_occupation = np.tile(occ, self.levels**2)

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        energies, vecs = np.linalg.eigh(self.h_idle)
        return energies, vecs

    @cached_property
    def dressed_map(self) -> np.ndarray:
        """Eigenvector column index for every bare Fock index."""
        _, vecs = self.eig
        overlap = np.abs(vecs) ** 2
        order = np.argsort(-overlap.max(axis=1))
        taken: set[int] = set()
        mapping = np.empty(self.dim, dtype=int)
        for bare in order:
            for col in np.argsort(-overlap[bare]):
                if col not in taken:
                    taken.add(int(col))
                    mapping[bare] = col
                    break
        return mapping

    @cached_property
    def dressed_vectors(self) -> np.ndarray:
        """Columns are dressed states in bare-index order, phase-fixed real-positive on their bare component."""
        _, vecs = self.eig
        cols = vecs[:, self.dressed_map].astype(complex)
        diag = np.diagonal(cols).copy()
        return cols * (np.abs(diag) / diag)[None, :]

    @cached_property
    def dressed_energies(self) -> np.ndarray:
        """Eigenenergies (rad/s) in bare-index order."""
        energies, _ = self.eig
        return energies[self.dressed_map]

    def dressed_state(self, q1: int, q2: int, c: int = 0) -> np.ndarray:
        return self.dressed_vectors[:, bare_index(q1, q2, c, self.levels)].copy()

    def dressed_frequency(self, upper: tuple, lower: tuple) -> float:
        """Transition frequency in Hz between two dressed states."""
        e = self.dressed_energies
        return float((e[bare_index(*upper, levels=self.levels)]
                      - e[bare_index(*lower, levels=self.levels)]) / TWO_PI)

    @cached_property
    def qubit_indices(self) -> np.ndarray:
        """Bare indices of |q1 q2 0> for q1, q2 in 0..2 (lexicographic)."""
        L = self.levels
        return np.array([bare_index(i, j, 0, L) for i in range(3) for j in range(3)])

    def idle_propagator(self, duration: float) -> np.ndarray:
        energies, vecs = self.eig
        return (vecs * np.exp(-1j * energies * duration)) @ vecs.conj().T

    def to_rotating(self, psi: np.ndarray, t: float) -> np.ndarray:
        """Lab-frame state(s) to dressed-basis amplitudes in the idle rotating frame."""
        amps = self.dressed_vectors.conj().T @ psi
        phase = np.exp(1j * self.dressed_energies * t)
        return amps * (phase if amps.ndim == 1 else phase[:, None])

    def from_rotating(self, amps: np.ndarray, t: float) -> np.ndarray:
        phase = np.exp(-1j * self.dressed_energies * t)
        amps = amps * (phase if np.ndim(amps) == 1 else phase[:, None])
        return self.dressed_vectors @ amps
