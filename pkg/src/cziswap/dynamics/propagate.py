"""Lab-frame propagation of the driven transmon-coupler Hamiltonian.

H(t) = H_idle + (omega_c(Phi(t)) - omega_c(Phi_bias)) * n_c.  The static part
is exponentiated exactly from its eigendecomposition; the modulated part is
diagonal, so its flow over a substep is a pure phase set by the integral of
the frequency excursion (3-point Gauss-Legendre per substep). Steps are
composed to fourth order (Yoshida triple jump), and every factor is unitary,
so the norm is conserved to round-off.

During the flat top of a pulse the Hamiltonian is periodic in the carrier
period. Propagators over one period are tabulated once per drive, and long
flat segments jump whole periods with matrix powers.
"""

from __future__ import annotations

import dataclasses
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..gateset import GateKind, GateOp, embed
from . import _kernel
from .hamiltonian import TWO_PI, DeviceModel, coupler_frequency
from .params import DeviceParams
from .pulses import FluxDrive, PulseSchedule

DEFAULT_DT = 5e-12

_CBRT2 = 2.0 ** (1.0 / 3.0)
W1 = 1.0 / (2.0 - _CBRT2)
W0 = -_CBRT2 / (2.0 - _CBRT2)
_BOUNDS = np.array([0.0, W1, W1 + W0, 1.0])
_GL_X, _GL_W = np.polynomial.legendre.leggauss(3)
_CHUNK = 100_000
_EPS = 1e-9


class IntegrationError(RuntimeError):
    pass


@dataclass
class FloquetTable:
    step: float
    steps_per_period: int
    table: np.ndarray  # (N + 1, dim, dim), U(j h, 0) on the carrier grid

    @property
    def period_propagator(self) -> np.ndarray:
        return self.table[-1]


class Propagator:
    """Integrator bound to one device model and step size."""

    def __init__(self, model: DeviceModel | DeviceParams, dt: float = DEFAULT_DT, kernel=None):
        self.model = model if isinstance(model, DeviceModel) else DeviceModel(model)
        self.params = self.model.params
        self.dt = float(dt)
        self.kernel = kernel if kernel is not None else _kernel.split_steps
        self._exps: dict = {}
        self._floquet: OrderedDict = OrderedDict()

    # -- building blocks -------------------------------------------------

    def _static_exps(self, h: float):
        key = round(h / 1e-18)
        hit = self._exps.get(key)
        if hit is None:
            energies, vecs = self.model.eig
            vh = vecs.conj().T

            def ex(c):
                return np.asfortranarray((vecs * np.exp(-1j * energies * c * h)) @ vh)

            hit = (ex(W1 / 2), ex((W1 + W0) / 2), ex(W1))
            if len(self._exps) > 64:
                self._exps.clear()
            self._exps[key] = hit
        return hit

    def _delta_omega(self, flux: np.ndarray) -> np.ndarray:
        return TWO_PI * coupler_frequency(flux, self.params) - self.model.omega_bias

    def _thetas(self, flux_fn, t0: float, h: float, n: int) -> np.ndarray:
        starts = t0 + h * np.arange(n)
        bounds = starts[:, None] + h * _BOUNDS[None, :]
        a, b = bounds[:, :3], bounds[:, 1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid[..., None] + half[..., None] * _GL_X
        vals = self._delta_omega(flux_fn(nodes))
        return half * (vals @ _GL_W)

    def _run(self, psi, flux_fn, t0: float, h: float, n: int):
        exps = self._static_exps(h)
        levels = self.model.coupler_occupation
        done = 0
        while done < n:
            m = min(_CHUNK, n - done)
            th = self._thetas(flux_fn, t0 + done * h, h, m)
            psi = self.kernel(*exps, levels, th, psi)
            done += m
        return psi

    def step(self, psi, flux_fn, t0: float, t1: float):
        """Uniform steps of at most ``dt`` from ``t0`` to ``t1``."""
        span = t1 - t0
        if span <= 0:
            return np.array(psi, dtype=complex, copy=True)
        n = max(1, math.ceil(span / self.dt - _EPS))
        return self._run(psi, flux_fn, t0, span / n, n)

    def idle(self, psi, duration: float):
        if duration <= 0:
            return np.array(psi, dtype=complex, copy=True)
        return self.model.idle_propagator(duration) @ psi

    # -- flat-top drives ---------------------------------------------------

    @staticmethod
    def _flat_flux(amplitude, carrier, phase, dc):
        def flux(t):
            return amplitude * np.cos(TWO_PI * carrier * t + phase) + dc
        return flux

    def floquet_table(self, amplitude: float, carrier: float, phase: float, dc: float) -> FloquetTable:
        key = (amplitude, carrier, phase % (2 * np.pi), dc, self.dt)
        hit = self._floquet.get(key)
        if hit is not None:
            self._floquet.move_to_end(key)
            return hit
        period = 1.0 / carrier
        nper = max(1, math.ceil(period / self.dt - _EPS))
        h = period / nper
        flux = self._flat_flux(amplitude, carrier, phase, dc)
        thetas = self._thetas(flux, 0.0, h, nper)
        exps = self._static_exps(h)
        levels = self.model.coupler_occupation
        dim = self.model.dim
        table = np.empty((nper + 1, dim, dim), dtype=complex)
        u = np.eye(dim, dtype=complex)
        table[0] = u
        for j in range(nper):
            u = self.kernel(*exps, levels, thetas[j:j + 1], u)
            table[j + 1] = u
        hit = FloquetTable(h, nper, table)
        self._floquet[key] = hit
        while len(self._floquet) > 6:
            self._floquet.popitem(last=False)
        return hit

    def flat(self, psi, drive: FluxDrive, t0: float, t1: float):
        """Propagate through the constant-amplitude part of ``drive``."""
        dc = drive.dc(self.params)
        flux = self._flat_flux(drive.amplitude, drive.carrier_hz, drive.phase, dc)
        ft = self.floquet_table(drive.amplitude, drive.carrier_hz, drive.phase, dc)
        h, nper = ft.step, ft.steps_per_period
        k0 = math.ceil(t0 / h - _EPS)
        k1 = math.floor(t1 / h + _EPS)
        if k1 - k0 < 2:
            return self.step(psi, flux, t0, t1)
        psi = self.step(psi, flux, t0, k0 * h)
        q0, r0 = divmod(k0, nper)
        q1, r1 = divmod(k1, nper)
        psi = ft.table[r0].conj().T @ psi
        if q1 > q0:
            psi = np.linalg.matrix_power(ft.period_propagator, q1 - q0) @ psi
        psi = ft.table[r1] @ psi
        return self.step(psi, flux, k1 * h, t1)

    def drive(self, psi, drive: FluxDrive, t_start: float):
        """Rise, flat top and fall of one coupler pulse starting at ``t_start``."""
        def ramp(t):
            return drive.flux(t, t_start, self.params)

        t_flat = t_start + drive.rise
        t_fall = t_start + drive.duration - drive.fall
        psi = self.step(psi, ramp, t_start, t_flat)
        psi = self.flat(psi, drive, t_flat, t_fall)
        return self.step(psi, ramp, t_fall, t_start + drive.duration)

    def drive_durations(self, psi, drive: FluxDrive, t_start: float, durations):
        """States after complete pulses of each duration, sharing rise and Floquet table."""
        def ramp_for(d):
            dd = dataclasses.replace(drive, duration=d)
            return lambda t: dd.flux(t, t_start, self.params)

        t_flat = t_start + drive.rise
        head = self.step(psi, ramp_for(max(durations)), t_start, t_flat)
        out = []
        for d in durations:
            t_fall = t_start + d - drive.fall
            state = self.flat(head, drive, t_flat, t_fall)
            out.append(self.step(state, ramp_for(d), t_fall, t_start + d))
        return out

    # -- ideal single-qubit operations -------------------------------------

    def apply_ideal(self, psi, op: GateOp, t: float):
        """Instantaneous qubit gate, defined in the idle rotating frame of the dressed states."""
        if op.kind is GateKind.DELAY:
            return np.array(psi, dtype=complex, copy=True)
        L = self.model.levels
        g = embed(op.matrix(), op.targets, (L, L, L))
        amps = self.model.to_rotating(psi, t)
        return self.model.from_rotating(g @ amps, t)


@dataclass
class EvolveResult:
    state: np.ndarray
    unitary: np.ndarray | None
    time: float


def evolve(state, schedule: PulseSchedule, params: DeviceParams | Propagator, *,
           unitary: bool = False, t_end: float | None = None) -> EvolveResult:
    """Integrate the Schroedinger equation through ``schedule`` in the lab frame.

    ``state`` is a vector (or block of columns) in the bare Fock basis at t=0.
    With ``unitary=True`` the full propagator is accumulated as well.
    """
    prop = params if isinstance(params, Propagator) else Propagator(params, dt=schedule.dt)
    schedule.validate(prop.params)
    psi0 = np.asarray(state, dtype=complex)
    psi = np.eye(prop.model.dim, dtype=complex) if unitary else psi0.copy()
    t = 0.0
    for start, item in schedule.sorted_entries():
        psi = prop.idle(psi, start - t)
        t = start
        if isinstance(item, FluxDrive):
            psi = prop.drive(psi, item, start)
            t = start + item.duration
        else:
            psi = prop.apply_ideal(psi, item, start)
    end = schedule.end if t_end is None else max(t_end, schedule.end)
    psi = prop.idle(psi, end - t)
    u = None
    if unitary:
        u = psi
        psi = u @ psi0
    norms = np.linalg.norm(u if unitary else psi, axis=0)
    drift = float(np.abs(norms - np.linalg.norm(psi0, axis=0) if not unitary else norms - 1.0).max())
    if drift > 1e-6:
        raise IntegrationError(
            f"norm drift {drift:.2e} after {end * 1e9:.1f} ns at dt={prop.dt:.2e}s; "
            "reduce the step size")
    return EvolveResult(psi, u, end)
