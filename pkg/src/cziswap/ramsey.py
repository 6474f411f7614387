"""Conditional and cross-Ramsey experiments, their backends, and sinusoid fits."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import curve_fit

from . import noise
from .gateset import Circuit, GateKind, GateOp, apply_circuit, basis_state, op_matrix
from .rng import stream

LABELS = [f"{i}{j}" for i in range(3) for j in range(3)]
SHOTS = {"CZ": 35_000, "iSWAP": 15_000, "SWAP": 250_000}
SWAP_CIRCUIT_DURATION = 1.960e-6
MIN_POINTS = 8
MAX_GAP = 0.5 * np.pi
FLAT_SWING = 0.05
# matches the integrator norm bound, so pulse traces pass unrenormalised
PROB_TOL = 1e-8


class RamseyError(ValueError):
    pass


class TuneUpError(RuntimeError):
    pass


def _wrap(x: float) -> float:
    return float((x + np.pi) % (2 * np.pi) - np.pi)


# -- circuits ------------------------------------------------------------------

def _pad(c: Circuit, pad_to: float | None) -> Circuit:
    if pad_to is not None:
        gap = pad_to - c.duration
        if gap < -1e-15:
            raise RamseyError(f"circuit lasts {c.duration:g} s, longer than pad_to={pad_to:g} s")
        if gap > 0:
            c.add(GateKind.DELAY, 0, duration=gap)
    return c


def build_conditional_ramsey(gate: str, q_c_prep: int, phi: float, *,
                             roles: tuple = (0, 1), pad_to: float | None = None) -> Circuit:
    """[X on q_c]; sqrtX on q_t; gate; VZ(phi) on q_t; sqrtX on q_t.

    ``gate`` is "CZ" or "identity" (the no-interaction reference).
    """
    if gate not in ("CZ", "identity"):
        raise RamseyError(f"conditional Ramsey does not support {gate!r}")
    if q_c_prep not in (0, 1):
        raise RamseyError("control preparation must be 0 or 1")
    qc, qt = roles
    c = Circuit((2, 2))
    if q_c_prep:
        c.add(GateKind.X, qc)
    c.add(GateKind.SQRT_X, qt)
    if gate == "CZ":
        c.add(GateKind.CZ, 0, 1)
    c.add(GateKind.VIRTUAL_Z, qt, phase=phi)
    c.add(GateKind.SQRT_X, qt)
    return _pad(c, pad_to)


def build_cross_ramsey(gate: str, q_c_prep: int, phi: float, *, roles: tuple = (0, 1),
                       swap_form: str = "short", swap_correction: Sequence[float] = (0.0, 0.0),
                       pad_to: float | None = None) -> Circuit:
    """[X on q_c]; sqrtX on q_t; gate; VZ(phi) on q_c; sqrtX on q_c.

    SWAP is expanded as iSWAP, CZ, S-dagger on both qubits ("short") or the
    same straddled by Hadamards ("hadamard"). ``swap_correction`` adds one
    virtual-Z per qubit right after the CZ of the expansion.
    """
    if gate not in ("iSWAP", "SWAP"):
        raise RamseyError(f"cross-Ramsey does not support {gate!r}")
    if q_c_prep not in (0, 1):
        raise RamseyError("control preparation must be 0 or 1")
    if swap_form not in ("short", "hadamard"):
        raise RamseyError(f"unknown SWAP form {swap_form!r}")
    qc, qt = roles
    c = Circuit((2, 2))
    if q_c_prep:
        c.add(GateKind.X, qc)
    c.add(GateKind.SQRT_X, qt)
    if gate == "iSWAP":
        c.add(GateKind.ISWAP, 0, 1)
    else:
        if swap_form == "hadamard":
            c.add(GateKind.H, 0).add(GateKind.H, 1)
        c.add(GateKind.ISWAP, 0, 1).add(GateKind.CZ, 0, 1)
        for site, beta in enumerate(swap_correction):
            if beta:
                c.add(GateKind.VIRTUAL_Z, site, phase=float(beta))
        c.add(GateKind.S_DAGGER, 0).add(GateKind.S_DAGGER, 1)
        if swap_form == "hadamard":
            c.add(GateKind.H, 0).add(GateKind.H, 1)
    c.add(GateKind.VIRTUAL_Z, qc, phase=phi)
    c.add(GateKind.SQRT_X, qc)
    return _pad(c, pad_to)


BUILDERS = {"CZ": build_conditional_ramsey, "identity": build_conditional_ramsey,
            "iSWAP": build_cross_ramsey, "SWAP": build_cross_ramsey}


def output_state(gate: str, q_c_prep: int) -> tuple:
    """Tracked output |q_c q_t>: |prep 1> for conditional, |1 prep> for cross-Ramsey."""
    return (q_c_prep, 1) if gate in ("CZ", "identity") else (1, q_c_prep)


def _label_index(output: tuple, roles: tuple) -> int:
    levels = [0, 0]
    levels[roles[0]], levels[roles[1]] = output
    return 3 * levels[0] + levels[1]


# -- backends --------------------------------------------------------------------

def _embed9(p4: np.ndarray) -> np.ndarray:
    out = np.zeros(9)
    out[[0, 1, 3, 4]] = p4
    return out


class ExactBackend:
    name = "exact"

    def populations(self, circuit: Circuit) -> np.ndarray:
        psi = apply_circuit(circuit, basis_state((0, 0), circuit.register))
        return _embed9(np.abs(psi) ** 2)


@dataclass
class NoisyBackend:
    """Ideal unitaries followed by relaxation (and optionally dephasing) for each op's duration."""
    t1: Sequence[float]
    t2: Sequence[float] | None = None
    name: str = "noisy"

    def populations(self, circuit: Circuit) -> np.ndarray:
        rho = noise.noisy_density(circuit, self.t1, self.t2)
        return _embed9(np.clip(np.real(np.diagonal(rho)), 0.0, 1.0))


class PulseBackend:
    """Two-qubit gates as calibrated coupler pulses; single-qubit gates ideal.

    A single-qubit gate acts instantly at the start of its slot and the
    device then idles for the slot duration. Each two-qubit pulse is followed
    by its virtual-Z compensation. States are cached by circuit prefix, so a
    phase sweep only re-simulates what follows the swept gate.
    """
    name = "pulse"

    def __init__(self, propagator, calibrations: dict):
        self.prop = propagator
        self.cals = dict(calibrations)
        self._cache: dict = {}

    def _advance(self, state, op: GateOp):
        psi, t = state
        if op.kind in (GateKind.CZ, GateKind.ISWAP):
            cal = self.cals.get(op.kind.value)
            if cal is None:
                raise RamseyError(f"pulse backend has no {op.kind.value} calibration")
            psi = self.prop.drive(psi, cal.drive(t), t)
            t += cal.duration_s
            for site, phi in enumerate(cal.phi_comp):
                psi = self.prop.apply_ideal(psi, GateOp(GateKind.VIRTUAL_Z, (site,), phi), t)
            return psi, t
        if op.kind.arity != 1:
            raise RamseyError(f"pulse backend cannot play {op.kind.value}; expand it first")
        psi = self.prop.apply_ideal(psi, op, t)
        psi = self.prop.idle(psi, op.duration)
        return psi, t + op.duration

    def final_state(self, circuit: Circuit):
        ops = tuple(circuit.ops)
        k = len(ops)
        while k > 0 and ops[:k] not in self._cache:
            k -= 1
        if k:
            state = self._cache[ops[:k]]
        else:
            state = (self.prop.model.dressed_state(0, 0, 0).astype(complex), 0.0)
        for j in range(k, len(ops)):
            state = self._advance(state, ops[j])
            self._cache[ops[:j + 1]] = state
        if len(self._cache) > 4096:
            self._cache.clear()
        return state

    def populations(self, circuit: Circuit) -> np.ndarray:
        psi, t = self.final_state(circuit)
        L = self.prop.model.levels
        amps = self.prop.model.to_rotating(psi, t).reshape(L, L, L)
        return (np.abs(amps) ** 2).sum(axis=2)[:3, :3].reshape(-1)


class DeviceBackend:
    """Calibrated pulses with decoherence, on a two-qutrit density matrix.

    Each two-qubit gate is its calibrated pulse with compensation, as a
    channel on the qutrits with the coupler traced out; single-qubit gates
    are ideal, and after every slot both qutrits relax and dephase for the
    slot duration.
    """
    name = "device"
    register = (3, 3)

    def __init__(self, propagator, calibrations: dict, t1: Sequence[float],
                 t2: Sequence[float] | None = None):
        self.prop = propagator
        self.cals = dict(calibrations)
        self.t1 = tuple(t1)
        self.t2 = None if t2 is None else tuple(t2)
        self._blocks: dict = {}
        self._channels: dict = {}

    def _kraus(self, kind: str, t: float) -> list:
        from .dynamics.calibrate import compensated_kraus
        key = (kind, round(t * 1e12))
        if key not in self._blocks:
            cal = self.cals.get(kind)
            if cal is None:
                raise RamseyError(f"device backend has no {kind} calibration")
            self._blocks[key] = compensated_kraus(cal, self.prop, t)
        return self._blocks[key]

    def _decay(self, rho: np.ndarray, tau: float) -> np.ndarray:
        key = round(tau * 1e12)
        if key not in self._channels:
            chans = []
            for site in range(2):
                chans.append(noise.amplitude_damping(tau, self.t1[site], 3).embed(site, self.register))
                if self.t2 is not None:
                    chans.append(noise.pure_dephasing(tau, self.t1[site], self.t2[site], 3)
                                 .embed(site, self.register))
            self._channels[key] = chans
        for ch in self._channels[key]:
            rho = ch.apply(rho)
        return rho

    def density(self, circuit: Circuit) -> np.ndarray:
        rho = np.zeros((9, 9), dtype=complex)
        rho[0, 0] = 1.0
        t = 0.0
        for op in circuit.ops:
            if op.kind in (GateKind.CZ, GateKind.ISWAP):
                ops = self._kraus(op.kind.value, t)
                tau = self.cals[op.kind.value].duration_s
            elif op.kind.arity == 1 or op.kind is GateKind.DELAY:
                ops = [] if op.kind is GateKind.DELAY else [op_matrix(op, self.register)]
                tau = op.duration
            else:
                raise RamseyError(f"device backend cannot play {op.kind.value}; expand it first")
            if ops:
                rho = sum(k @ rho @ k.conj().T for k in ops)
            if tau > 0:
                rho = self._decay(rho, tau)
            t += tau
        return rho

    def populations(self, circuit: Circuit) -> np.ndarray:
        return np.clip(np.real(np.diagonal(self.density(circuit))), 0.0, 1.0)


@dataclass
class ShotBackend:
    """Multinomial sampling of another backend, optionally through a confusion matrix.

    ``confusion`` is row-stochastic over the nine two-qutrit labels,
    T[i, j] = P(read j | prepared i), so measured frequencies follow T^T p.
    """
    base: object
    shots: int
    seed: int = 0
    confusion: np.ndarray | None = None
    name: str = "shots"

    def __post_init__(self):
        if self.shots <= 0:
            raise RamseyError("shot count must be positive")

    def sample(self, circuit: Circuit, key: tuple) -> np.ndarray:
        p = np.clip(self.base.populations(circuit), 0.0, None)
        if self.confusion is not None:
            p = np.asarray(self.confusion, dtype=float).T @ p
        p = p / p.sum()
        counts = stream(self.seed, "ramsey", *key).multinomial(self.shots, p)
        return counts / self.shots


def make_backend(name: str, *, params=None, shots: int | None = None, seed: int = 0,
                 confusion=None, propagator=None, calibrations=None, dephasing: bool = False,
                 source: str = "exact"):
    """Backend by name: exact, noisy, pulse, device, or shots (sampling ``source``)."""
    if name == "exact":
        return ExactBackend()
    if name == "noisy":
        if params is None:
            raise RamseyError("noisy backend needs device parameters")
        return NoisyBackend(params.t1, params.t2star if dephasing else None)
    if name == "pulse":
        if propagator is None or not calibrations:
            raise RamseyError("pulse backend needs a propagator and gate calibrations")
        return PulseBackend(propagator, calibrations)
    if name == "device":
        if params is None or propagator is None or not calibrations:
            raise RamseyError("device backend needs parameters, a propagator and gate calibrations")
        return DeviceBackend(propagator, calibrations, params.t1, params.t2star)
    if name == "shots":
        base = make_backend(source, params=params, propagator=propagator,
                            calibrations=calibrations, dephasing=dephasing)
        return ShotBackend(base, shots or 1, seed, confusion)
    raise RamseyError(f"unknown backend {name!r}")


# -- traces ----------------------------------------------------------------------

@dataclass
class RamseyTrace:
    phi: np.ndarray
    populations: np.ndarray          # (n_phi, 9), columns p00..p22 with Q1 first
    gate: str
    prep: int
    roles: tuple                     # (q_c, q_t) register sites
    backend: str = "exact"
    shots: int | None = None
    ideal: np.ndarray | None = None  # ideal tracked population on the same grid
    ideal_params: tuple = (0.5, 0.0, 0.5)  # (A, delta, m) of the ideal curve
    mitigated: bool = False          # box-constrained estimates need not sum to 1

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.populations = np.asarray(self.populations, dtype=float)
        if self.populations.shape != (self.phi.size, 9):
            raise RamseyError("populations must have shape (n_phi, 9)")
        if np.any(self.populations < -PROB_TOL) or np.any(self.populations > 1 + PROB_TOL):
            raise RamseyError("population outside [0, 1]")
        if not self.mitigated and np.any(self.populations.sum(axis=1) > 1 + PROB_TOL):
            raise RamseyError("populations sum above 1")

    @property
    def output(self) -> tuple:
        return output_state(self.gate, self.prep)

    @property
    def output_label(self) -> str:
        return "".join(map(str, self.output))

    @property
    def target(self) -> np.ndarray:
        return self.populations[:, _label_index(self.output, self.roles)]

    def with_populations(self, populations: np.ndarray, backend: str | None = None,
                         mitigated: bool | None = None) -> "RamseyTrace":
        return RamseyTrace(self.phi, populations, self.gate, self.prep, self.roles,
                           backend or self.backend, self.shots, self.ideal, self.ideal_params,
                           self.mitigated if mitigated is None else mitigated)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phi_rad"] + [f"p{lab}" for lab in LABELS] + ["backend", "shots"])
            for phi, row in zip(self.phi, self.populations):
                w.writerow([repr(float(phi))] + [repr(float(x)) for x in row]
                           + [self.backend, "" if self.shots is None else self.shots])


def read_trace_csv(path) -> tuple:
    """(phi, populations (n, 9), backend, shots) from a trace CSV; '#' lines are skipped."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    cols = [f"p{lab}" for lab in LABELS]
    if not rows or "phi_rad" not in rows[0] or any(c not in rows[0] for c in cols):
        raise RamseyError(f"{path}: need columns phi_rad and {cols[0]}..{cols[-1]}")
    phi = np.array([float(r["phi_rad"]) for r in rows])
    pops = np.array([[float(r[c]) for c in cols] for r in rows])
    shots = rows[0].get("shots") or None
    return phi, pops, rows[0].get("backend", ""), None if shots is None else int(shots)


def ideal_sinusoid(gate: str, prep: int, roles: tuple = (0, 1), **build) -> tuple:
    """(A, delta, m) of the ideal tracked population A cos(phi + delta) + m.

    A virtual-Z sweep makes the population a pure first harmonic in phi, so
    four exact evaluations determine it.
    """
    builder = BUILDERS[gate]
    idx = _label_index(output_state(gate, prep), roles)
    backend = ExactBackend()
    y = [backend.populations(builder(gate, prep, phi, roles=roles, **build))[idx]
         for phi in (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi)]
    m = 0.25 * sum(y)
    a = 0.5 * (y[0] - y[2])          # A cos(delta)
    b = -0.5 * (y[1] - y[3])         # A sin(delta)
    amp = math.hypot(a, b)
    delta = math.atan2(b, a) if amp > 1e-12 else 0.0
    return amp, delta, m


def sweep(gate: str, q_c_prep: int, phis, backend="exact", *, roles: tuple = (0, 1),
          builder: Callable | None = None, **build) -> RamseyTrace:
    """Run the Ramsey experiment of ``gate`` at every phase in ``phis``."""
    phis = np.asarray(phis, dtype=float)
    if phis.size == 0:
        raise RamseyError("empty phase grid")
    backend = make_backend(backend) if isinstance(backend, str) else backend
    builder = builder or BUILDERS[gate]
    circuits = [builder(gate, q_c_prep, float(phi), roles=roles, **build) for phi in phis]
    if isinstance(backend, ShotBackend):
        pops = np.array([backend.sample(c, (gate, q_c_prep, roles[0], i))
                         for i, c in enumerate(circuits)])
        shots = backend.shots
    else:
        pops = np.array([backend.populations(c) for c in circuits])
        shots = None
    amp, delta, m = ideal_sinusoid(gate, q_c_prep, roles, **build)
    return RamseyTrace(phis, pops, gate, q_c_prep, tuple(roles), backend.name, shots,
                       amp * np.cos(phis + delta) + m, (amp, delta, m))


# -- fitting ---------------------------------------------------------------------

@dataclass
class SinusoidFit:
    swing: float
    delta_offset: float
    delta_phase: float     # rad
    mse: float
    swing_err: float
    offset_err: float
    phase_err: float
    amplitude: float
    phase: float
    offset: float
    converged: bool = True
    message: str = ""

    def to_record(self) -> dict:
        return {"swing": self.swing, "swing_err": self.swing_err,
                "delta_offset": self.delta_offset, "delta_offset_err": self.offset_err,
                "delta_phase_mrad": 1e3 * self.delta_phase,
                "delta_phase_err_mrad": 1e3 * self.phase_err,
                "mse": self.mse, "converged": self.converged}


def _model(phi, amp, delta, m):
    return amp * np.cos(phi + delta) + m


def _check_coverage(phi: np.ndarray) -> None:
    if phi.size < MIN_POINTS:
        raise RamseyError(f"need at least {MIN_POINTS} points, got {phi.size}")
    w = np.sort(np.mod(phi, 2 * np.pi))
    gaps = np.diff(np.concatenate([w, [w[0] + 2 * np.pi]]))
    if gaps.max() > MAX_GAP + 1e-12:
        raise RamseyError("phase grid does not cover a full period")


def fit_sinusoid(phi, y, max_nfev: int = 2000):
    """Least-squares A cos(phi + delta) + m with A >= 0; returns (params, errors, converged, message).

    A fit that fails to converge falls back to the linear least-squares
    solution and is flagged, with infinite uncertainties.
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    c = np.sum(y * np.exp(-1j * phi))
    p0 = [max(0.5 * (y.max() - y.min()), 1e-6), float(np.angle(c)), float(y.mean())]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            popt, _ = curve_fit(_model, phi, y, p0=p0, maxfev=max_nfev)
        ok, msg = True, ""
    except RuntimeError as exc:
        design = np.column_stack([np.cos(phi), -np.sin(phi), np.ones_like(phi)])
        (ac, as_, m), *_ = np.linalg.lstsq(design, y, rcond=None)
        popt = np.array([math.hypot(ac, as_), math.atan2(as_, ac), m])
        ok, msg = False, str(exc)
    amp, delta, m = popt
    if amp < 0:
        amp, delta = -amp, delta + np.pi
    err = _param_errors(phi, y, amp, delta, m) if ok else np.full(3, np.inf)
    return (float(amp), _wrap(delta), float(m)), err, ok, msg


def _param_errors(phi, y, amp, delta, m) -> np.ndarray:
    """Standard errors s^2 (J^T J)^-1 with s^2 = RSS / (N - 3); zero for an exact fit."""
    jac = np.column_stack([np.cos(phi + delta), -amp * np.sin(phi + delta), np.ones_like(phi)])
    rss = float(np.sum((y - _model(phi, amp, delta, m)) ** 2))
    try:
        cov = np.linalg.inv(jac.T @ jac) * rss / max(phi.size - 3, 1)
    except np.linalg.LinAlgError:
        return np.full(3, np.inf)
    return np.sqrt(np.abs(np.diag(cov)))


def fit_trace(trace: RamseyTrace) -> SinusoidFit:
    """Fit the tracked population and compare with the ideal curve."""
    _check_coverage(trace.phi)
    y = trace.target
    (amp, delta, m), err, ok, msg = fit_sinusoid(trace.phi, y)
    a_id, d_id, m_id = trace.ideal_params
    ideal = trace.ideal if trace.ideal is not None else _model(trace.phi, a_id, d_id, m_id)
    return SinusoidFit(
        swing=2 * amp, delta_offset=0.5 - m, delta_phase=_wrap(delta - d_id),
        mse=float(np.mean((y - ideal) ** 2)),
        swing_err=float(2 * err[0]), offset_err=float(err[2]), phase_err=float(err[1]),
        amplitude=amp, phase=delta, offset=m, converged=ok, message=msg)


# -- experiment sets -------------------------------------------------------------

ROLE_ORDERS = {"CZ": [(0, 1), (1, 0)], "iSWAP": [(0, 1), (1, 0)], "SWAP": [(0, 1), (1, 0)]}


def default_grid(gate: str) -> np.ndarray:
    n = 32 if gate == "CZ" else 16
    return np.linspace(0.0, 2 * np.pi, n, endpoint=False)


def experiment_set(gate: str, backend="exact", phis=None, **build) -> list:
    """Both control preparations for both role orders: four traces."""
    phis = default_grid(gate) if phis is None else phis
    return [sweep(gate, prep, phis, backend, roles=roles, **build)
            for roles in ROLE_ORDERS[gate] for prep in (0, 1)]


def fit_record(trace: RamseyTrace, fit: SinusoidFit) -> dict:
    rec = {"gate": trace.gate, "q_c": f"q{trace.roles[0] + 1}", "q_t": f"q{trace.roles[1] + 1}",
           "prep": trace.prep, "output": trace.output_label, "backend": trace.backend,
           "shots": trace.shots}
    rec.update(fit.to_record())
    return rec


# -- SWAP local-phase tune-up ----------------------------------------------------

@dataclass
class SwapPhaseTuneup:
    phases: tuple                     # rad per qubit, virtual-Z added after the SWAP's CZ
    traces: list = field(default_factory=list)

    def to_record(self) -> dict:
        return {"swap_phi_q1_rad": self.phases[0], "swap_phi_q2_rad": self.phases[1]}


def _parabola_peak(phi: np.ndarray, y: np.ndarray) -> float:
    order = np.argsort(phi)
    phi, y = phi[order], y[order]
    n = phi.size
    i = int(np.argmax(y))
    x = np.array([phi[i - 1] - (2 * np.pi if i == 0 else 0.0), phi[i],
                  phi[(i + 1) % n] + (2 * np.pi if i == n - 1 else 0.0)])
    yy = np.array([y[i - 1], y[i], y[(i + 1) % n]])
    a, b, _ = np.polyfit(x - phi[i], yy, 2)
    if a >= 0:
        return _wrap(phi[i])
    shift = float(np.clip(-b / (2 * a), x[0] - phi[i], x[2] - phi[i]))
    return _wrap(phi[i] + shift)


def tune_swap_local_phase(backend="exact", phis=None, *, z_offset: Sequence[float] = (0.0, 0.0),
                          swap_form: str = "short") -> SwapPhaseTuneup:
    """Virtual-Z per qubit that brings the SWAP cross-Ramsey to |1> at phi = 0.

    For each qubit the SWAP cross-Ramsey is run with that qubit as q_c,
    prepared in |1> by an X gate, and the phase of its final virtual-Z is
    swept; the correction is the phase of maximal P(|1>), refined by a
    parabola through the grid maximum. ``z_offset`` is an extra virtual-Z
    after the SWAP's CZ, used to inject a known phase error.
    """
    backend = make_backend(backend) if isinstance(backend, str) else backend
    phis = np.linspace(-np.pi, np.pi, 32, endpoint=False) if phis is None else np.asarray(phis, float)
    phases, traces = [], []
    for qc in (0, 1):
        roles = (qc, 1 - qc)
        tr = sweep("SWAP", 1, phis, backend, roles=roles, swap_form=swap_form,
                   swap_correction=tuple(z_offset))
        y = tr.target
        if y.max() - y.min() < FLAT_SWING:
            raise TuneUpError(f"flat SWAP response on q{qc + 1}: swing {y.max() - y.min():.3f}")
        phases.append(_parabola_peak(phis, y))
        traces.append(tr)
    return SwapPhaseTuneup((phases[0], phases[1]), traces)
