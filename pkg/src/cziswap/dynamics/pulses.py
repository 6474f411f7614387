"""Coupler flux drives and pulse schedules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..gateset import GateKind, GateOp
from .params import DeviceParams


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class FluxDrive:
    """Flat-top flux pulse ``A(t) cos(2 pi f t + phase) + phi_dc``.

    ``t`` is measured from the start of the circuit, not of the pulse, so the
    carrier phase of a late pulse includes ``2 pi f t_start``. The envelope
    rises and falls as half-Gaussians (sigma = rise / 4) over ``rise``/``fall``.
    """

    amplitude: float
    carrier_hz: float
    duration: float
    phase: float = 0.0
    phi_dc: float | None = None
    rise: float = 10e-9
    fall: float = 10e-9

    def __post_init__(self):
        if self.duration < self.rise + self.fall:
            raise ScheduleError("pulse shorter than its rise + fall")
        if self.amplitude < 0 or self.carrier_hz <= 0:
            raise ScheduleError("amplitude must be >= 0 and carrier > 0")

    def dc(self, params: DeviceParams) -> float:
        return params.phi_bias if self.phi_dc is None else self.phi_dc

    def check_flux(self, params: DeviceParams) -> None:
        if abs(self.dc(params)) + self.amplitude >= 0.5:
            raise ScheduleError("flux excursion reaches the SQUID frustration point")

    def envelope(self, t_rel) -> np.ndarray:
        """Envelope at times relative to the pulse start."""
        t = np.asarray(t_rel, dtype=float)
        env = np.where((t >= 0) & (t <= self.duration), self.amplitude, 0.0)
        if self.rise > 0:
            s = self.rise / 4.0
            m = t < self.rise
            env = np.where(m & (t >= 0),
                           self.amplitude * np.exp(-0.5 * ((t - self.rise) / s) ** 2), env)
        if self.fall > 0:
            s = self.fall / 4.0
            t_f = self.duration - self.fall
            m = t > t_f
            env = np.where(m & (t <= self.duration),
                           self.amplitude * np.exp(-0.5 * ((t - t_f) / s) ** 2), env)
        return env

    def flux(self, t, t_start: float, params: DeviceParams) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (self.envelope(t - t_start) * np.cos(2 * np.pi * self.carrier_hz * t + self.phase)
                + self.dc(params))


@dataclass
class PulseSchedule:
    """Time-ordered coupler drives and ideal single-qubit operations."""

    entries: list = field(default_factory=list)
    dt: float = 5e-12

    def add(self, start: float, item) -> "PulseSchedule":
        self.entries.append((float(start), item))
        return self

    @staticmethod
    def _duration(item) -> float:
        return item.duration

    @property
    def end(self) -> float:
        if not self.entries:
            return 0.0
        return max(s + self._duration(item) for s, item in self.entries)

    def sorted_entries(self) -> list:
        return sorted(self.entries, key=lambda e: e[0])

    def validate(self, params: DeviceParams) -> None:
        f_max = max(params.f01_q1_hz, params.f01_q2_hz, params.f_c0_hz)
        if self.dt > 1.0 / (20.0 * f_max):
            raise ScheduleError(
                f"dt={self.dt:.3g}s exceeds 1/(20 f_max)={1 / (20 * f_max):.3g}s")
        busy_until = -np.inf
        for start, item in self.sorted_entries():
            if start < 0:
                raise ScheduleError("negative start time")
            if isinstance(item, FluxDrive):
                if start < busy_until - 1e-15:
                    raise ScheduleError("overlapping coupler drives")
                item.check_flux(params)
                busy_until = start + item.duration
            elif isinstance(item, GateOp):
                if item.kind in (GateKind.CZ, GateKind.ISWAP, GateKind.SWAP):
                    raise ScheduleError("two-qubit gates must be given as flux drives")
            else:
                raise ScheduleError(f"unsupported schedule entry {item!r}")
