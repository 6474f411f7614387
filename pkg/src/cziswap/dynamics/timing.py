"""Repetition-rate bookkeeping for phase-coherent pulse generation."""

from __future__ import annotations

import math
from dataclasses import dataclass

CYCLE_TOL = 1e-9


@dataclass(frozen=True)
class Commensurability:
    commensurate: bool
    cycles: float
    residual_phase: float  # rad, 2 pi * frac(f_LO * T_rep)


def check_commensurability(t_rep: float, f_lo: float, tol: float = CYCLE_TOL) -> Commensurability:
    """Whether the local oscillator completes an integer number of cycles per repetition."""
    if not (t_rep > 0 and f_lo > 0):
        raise ValueError("repetition time and LO frequency must be positive")
    cycles = f_lo * t_rep
    frac = cycles - round(cycles)
    # the product of two floats carries a relative rounding error of ~1e-16
    near = abs(frac) <= max(tol, 4e-16 * cycles)
    residual = 0.0 if near else 2 * math.pi * (frac % 1.0)
    return Commensurability(near, cycles, residual)


def residual_population(t_rep: float, t1: float) -> float:
    """Excited-state population left after waiting ``t_rep`` with lifetime ``t1``."""
    if t_rep < 0 or t1 <= 0:
        raise ValueError("need t_rep >= 0 and t1 > 0")
    return math.exp(-t_rep / t1)
