"""Device parameters for the two-transmon + tunable-coupler system."""

from __future__ import annotations

import dataclasses
import math
import sys
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Raised for malformed or unphysical device configuration."""


@dataclass(frozen=True)
class DeviceParams:
    """Physical parameters; frequencies in Hz, times in s, flux in Phi0."""

    f01_q1_hz: float
    f01_q2_hz: float
    eta_q1_hz: float
    eta_q2_hz: float
    f_c0_hz: float
    eta_c_hz: float
    g_q1c_hz: float
    g_q2c_hz: float
    phi_bias: float
    t1_q1_s: float
    t1_q2_s: float
    t2star_q1_s: float
    t2star_q2_s: float
    t2echo_q1_s: float
    t2echo_q2_s: float
    levels: int = 3

    def __post_init__(self):
        if min(self.f01_q1_hz, self.f01_q2_hz, self.f_c0_hz) <= 0:
            raise ConfigError("transition frequencies must be positive")
        if self.eta_q1_hz >= 0 or self.eta_q2_hz >= 0 or self.eta_c_hz >= 0:
            raise ConfigError("transmon anharmonicities must be negative")
        if self.g_q1c_hz < 0 or self.g_q2c_hz < 0:
            raise ConfigError("coupling strengths must be non-negative")
        if abs(self.phi_bias) >= 0.5:
            raise ConfigError("|phi_bias| must stay below 0.5 Phi0")
        if self.levels < 3:
            raise ConfigError("at least three levels per site are required")
        times = (self.t1_q1_s, self.t1_q2_s, self.t2star_q1_s, self.t2star_q2_s,
                 self.t2echo_q1_s, self.t2echo_q2_s)
        if min(times) <= 0:
            raise ConfigError("coherence times must be positive")
        fc = self.f_c0_hz * math.sqrt(abs(math.cos(math.pi * self.phi_bias)))
        for f, g in ((self.f01_q1_hz, self.g_q1c_hz), (self.f01_q2_hz, self.g_q2c_hz)):
            if g > 0.2 * abs(fc - f):
                warnings.warn(
                    f"coupling {g:.3g} Hz is not small against the qubit-coupler "
                    f"detuning {abs(fc - f):.3g} Hz", stacklevel=3)

    @property
    def f12_q1_hz(self) -> float:
        return self.f01_q1_hz + self.eta_q1_hz

    @property
    def f12_q2_hz(self) -> float:
        return self.f01_q2_hz + self.eta_q2_hz

    @property
    def t1(self) -> tuple[float, float]:
        return (self.t1_q1_s, self.t1_q2_s)

    @property
    def t2star(self) -> tuple[float, float]:
        return (self.t2star_q1_s, self.t2star_q2_s)

    def replace(self, **changes) -> "DeviceParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown device keys: {', '.join(unknown)}")
        required = {f.name for f in dataclasses.fields(cls)
                    if f.default is dataclasses.MISSING}
        missing = sorted(required - set(data))
        if missing:
            raise ConfigError(f"missing device keys: {', '.join(missing)}")
        values = {k: (int(v) if k == "levels" else float(v)) for k, v in data.items()}
        return cls(**values)

    @classmethod
    def from_toml(cls, path: str | Path) -> "DeviceParams":
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def table1(cls) -> "DeviceParams":
        """The measured device, as shipped in ``data/table1.toml``."""
        text = resources.files("cziswap").joinpath("data/table1.toml").read_text()
        return cls.from_dict(tomllib.loads(text))


def dump_toml(params: DeviceParams) -> str:
    lines = []
    for key, value in params.to_dict().items():
        lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"
