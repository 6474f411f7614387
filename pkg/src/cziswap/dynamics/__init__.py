"""Pulse-level simulation of the two-qubit + coupler device."""

from .calibrate import (CalibrationError, GateCalibration, SweepMap, TwoQubitFrame,
                        calibrate_cz, calibrate_iswap, compensated_block, compensated_kraus,
                        measure_two_qubit_frame)
from .hamiltonian import DeviceModel, bare_index, build_hamiltonian, coupler_frequency
from .params import ConfigError, DeviceParams
from .propagate import IntegrationError, Propagator, evolve
from .pulses import FluxDrive, PulseSchedule, ScheduleError
from .timing import Commensurability, check_commensurability, residual_population

__all__ = [
    "CalibrationError", "Commensurability", "ConfigError", "DeviceModel", "DeviceParams",
    "FluxDrive", "GateCalibration", "IntegrationError", "Propagator", "PulseSchedule",
    "ScheduleError", "SweepMap", "TwoQubitFrame", "bare_index", "build_hamiltonian",
    "calibrate_cz", "calibrate_iswap", "check_commensurability", "compensated_block",
    "compensated_kraus",
    "coupler_frequency", "evolve", "measure_two_qubit_frame", "residual_population",
]
