"""Decoherence channels and coherence-limited gate fidelities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .gateset import Circuit, GateKind, op_matrix

KRAUS_TOL = 1e-10


class NoiseError(ValueError):
    pass


@dataclass(frozen=True)
class KrausChannel:
    operators: tuple
    duration: float = 0.0

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def completeness_error(self) -> float:
        acc = sum(k.conj().T @ k for k in self.operators)
        return float(np.abs(acc - np.eye(self.dim)).max())

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.operators)

    def embed(self, site: int, register: Sequence[int]) -> "KrausChannel":
        ops = []
        for k in self.operators:
            full = [np.eye(d) for d in register]
            full[site] = k
            out = full[0]
            for m in full[1:]:
                out = np.kron(out, m)
            ops.append(out)
        return KrausChannel(tuple(ops), self.duration)


def check_density(rho: np.ndarray, tol: float = 1e-12) -> None:
    """Raise unless rho is Hermitian, unit-trace and positive semidefinite."""
    if np.abs(rho - rho.conj().T).max() > tol:
        raise NoiseError("density matrix not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise NoiseError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-10:
        raise NoiseError("density matrix has a negative eigenvalue")


def amplitude_damping(tau: float, t1: float, levels: int = 2) -> KrausChannel:
    """Energy relaxation over ``tau`` for an oscillator truncated at ``levels``.

    Level n relaxes at rate n / T1, so it is left with probability
    1 - exp(-n tau / T1). The Kraus operators are those of bosonic loss,
    which include the 2 -> 0 cascade and compose exactly in time.
    """
    if tau < 0 or t1 <= 0:
        raise NoiseError("need tau >= 0 and T1 > 0")
    eta = math.exp(-tau / t1) if math.isfinite(t1) else 1.0
    ops = []
    for k in range(levels):
        op = np.zeros((levels, levels))
        for n in range(k, levels):
            op[n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
        if k == 0 or np.any(op):
            ops.append(op.astype(complex))
    return KrausChannel(tuple(ops), tau)


def dephasing_time(t1: float, t2: float) -> float:
    """Pure-dephasing time from 1/T_phi = 1/T2 - 1/(2 T1); infinite when T2 = 2 T1."""
    if t2 > 2 * t1 * (1 + 1e-12):
        raise NoiseError(f"T2 = {t2:g} exceeds 2 T1 = {2 * t1:g}")
    rate = 1.0 / t2 - 1.0 / (2.0 * t1)
    return math.inf if rate <= 1e-15 / t2 else 1.0 / rate


def pure_dephasing(tau: float, t1: float, t2: float, levels: int = 2) -> KrausChannel:
    """Scales |m><n| by exp(-(m - n)^2 tau / T_phi); off-diagonals of a qubit by exp(-tau / T_phi)."""
    t_phi = dephasing_time(t1, t2)
    gamma = 0.0 if math.isinf(t_phi) else tau / t_phi
    n = np.arange(levels)
    schur = np.exp(-gamma * (n[:, None] - n[None, :]) ** 2)
    vals, vecs = np.linalg.eigh(schur)
    ops = tuple(np.diag(np.sqrt(v) * vecs[:, i]).astype(complex)
                for i, v in enumerate(vals) if v > 1e-14)
    return KrausChannel(ops, tau)


def apply_channel(rho: np.ndarray, channel: KrausChannel, site: int | None = None,
                  register: Sequence[int] | None = None) -> np.ndarray:
    if site is not None:
        channel = channel.embed(site, register)
    return channel.apply(rho)


def coherence_limited_fidelity(tau: float, t1_list: Sequence[float]) -> float:
    """1 - (tau / 2) * sum_k 1/T1_k."""
    if tau < 0:
        raise NoiseError("negative duration")
    return 1.0 - 0.5 * tau * sum(1.0 / t for t in t1_list)


def process_fidelity(channel: KrausChannel) -> float:
    """Entanglement fidelity with the identity, from the channel acting on half of a Bell pair."""
    d = channel.dim
    bell = np.eye(d).reshape(-1) / math.sqrt(d)
    rho = np.outer(bell, bell.conj())
    ops = [np.kron(k, np.eye(d)) for k in channel.operators]
    out = sum(k @ rho @ k.conj().T for k in ops)
    return float(np.real(bell.conj() @ out @ bell))


def damping_process_fidelity(tau: float, t1_list: Sequence[float]) -> float:
    """Density-matrix cross-check of the estimator: independent T1 channels on each qubit."""
    f = 1.0
    for t1 in t1_list:
        f *= process_fidelity(amplitude_damping(tau, t1))
    return f


def _noisy_run(circuit: Circuit, t1: Sequence[float], t2: Sequence[float] | None) -> np.ndarray:
    reg = circuit.register
    dim = circuit.dim
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    for op in circuit.ops:
        if op.kind is not GateKind.DELAY:
            u = op_matrix(op, reg)
            rho = u @ rho @ u.conj().T
        if op.duration > 0:
            for site, levels in enumerate(reg):
                rho = apply_channel(rho, amplitude_damping(op.duration, t1[site], levels), site, reg)
                if t2 is not None:
                    rho = apply_channel(rho, pure_dephasing(op.duration, t1[site], t2[site], levels),
                                        site, reg)
    return rho


def noisy_density(circuit: Circuit, t1: Sequence[float], t2: Sequence[float] | None = None) -> np.ndarray:
    """Final density matrix: each gate's unitary, then relaxation of every site for its duration."""
    return _noisy_run(circuit, t1, t2)


def noisy_curve(family: Callable[[float], Circuit], phis, t1: Sequence[float],
                t2: Sequence[float] | None = None) -> np.ndarray:
    """Basis-state populations (n_phi, dim) for a phase-swept circuit family under T1 noise."""
    phis = np.asarray(phis, dtype=float)
    return np.array([np.real(np.diagonal(_noisy_run(family(phi), t1, t2))) for phi in phis])
