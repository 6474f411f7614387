"""Decoherence fits with a relative-error acceptance rule, Doane binning and error propagation."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

MAX_REL_ERR = 0.15
MIN_POINTS = 10

# Lab values used by the error-propagation and detuning presets (Hz).
TABLE1 = {
    "f01_q1_hz": 3.86011e9, "f01_q2_hz": 3.39741e9,
    "f12_q1_hz": 3.60404e9, "f12_q2_hz": 3.18992e9,
    "f_cz_hz": 207.24e6, "f_iswap_hz": 461.51e6,
    "err_f01_hz": 156e3, "err_f12_hz": 190e3,
    "err_f_cz_hz": 10e3, "err_f_iswap_hz": 82e3,
}
CZ_COEFFS = (-1.0, +1.0, -1.0)      # f12,Q1  f01,Q2  f_CZ
ISWAP_COEFFS = (+1.0, +1.0, -1.0)   # f01,Q1  f01,Q2  f_iSWAP

MODELS = ("T1", "T2star", "T2echo")


class FitError(ValueError):
    pass


def _exp(t, a, tau, m):
    return a * np.exp(-t / tau) + m


def _damped_cos(t, a, tau, f, phi, m):
    return a * np.exp(-t / tau) * np.cos(2 * np.pi * f * t + phi) + m


@dataclass
class DecoherenceFit:
    model: str
    A: float
    T: float
    m: float
    f: float = float("nan")
    phi: float = float("nan")
    errors: dict = field(default_factory=dict)
    accepted: bool = False
    converged: bool = True
    message: str = ""

    @property
    def rel_err_T(self) -> float:
        err = self.errors.get("T", math.inf)
        return err / abs(self.T) if self.T and math.isfinite(self.T) else math.inf

    def predict(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.model == "T2star":
            return _damped_cos(t, self.A, self.T, self.f, self.phi, self.m)
        return _exp(t, self.A, self.T, self.m)

    def to_row(self) -> dict:
        return {"model": self.model, "A": self.A, "T_s": self.T, "f_hz": self.f,
                "phi_rad": self.phi, "m": self.m, "err_T_frac": self.rel_err_T,
                "accepted": self.accepted}


def _initial_decay(t, y, m):
    """Amplitude and the time at which |y - m| first falls below |A| / e."""
    dev = np.abs(y - m)
    a = y[0] - m
    below = np.flatnonzero(dev <= abs(a) / math.e)
    tau = t[below[0]] - t[0] if below.size and t[below[0]] > t[0] else 0.5 * (t[-1] - t[0])
    return a, max(tau, (t[1] - t[0]))


def _initial_frequency(t, y):
    """Fundamental from the DFT of the mean-removed signal resampled on a uniform grid."""
    n = max(t.size, 64)
    tu = np.linspace(t[0], t[-1], n)
    yu = np.interp(tu, t, y) - y.mean()
    spec = np.fft.rfft(yu * np.hanning(n))
    freqs = np.fft.rfftfreq(n, tu[1] - tu[0])
    k = int(np.argmax(np.abs(spec[1:]))) + 1
    return float(freqs[k]), float(np.angle(spec[k]))


def fit_decoherence(t, y, model: str) -> DecoherenceFit:
    """Least-squares decay fit; accepted iff it converges with Err(T)/T <= 15%."""
    if model not in MODELS:
        raise FitError(f"unknown model {model!r}; choose from {MODELS}")
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < MIN_POINTS or t.size != y.size:
        raise FitError(f"need at least {MIN_POINTS} matching points")
    if np.any(np.diff(t) <= 0):
        raise FitError("time grid must be strictly increasing")
    tail = y[-max(2, t.size // 10):]
    m0 = float(tail.mean())
    a0, tau0 = _initial_decay(t, y, m0)
    if model == "T2star":
        f0, phi0 = _initial_frequency(t, y)
        env = np.abs(y - y.mean())
        a0 = float(env[:max(2, t.size // 20)].max()) or 1e-3
        fun = _damped_cos
        p0 = [a0, tau0, f0, phi0 - 2 * np.pi * f0 * t[0], float(y.mean())]
        names = ("A", "T", "f", "phi", "m")
    else:
        fun = _exp
        p0 = [a0 if a0 else 1e-3, tau0, m0]
        names = ("A", "T", "m")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            popt, pcov = curve_fit(fun, t, y, p0=p0, maxfev=20_000)
        converged, message = True, ""
    except (RuntimeError, ValueError) as exc:
        popt, pcov = np.asarray(p0, dtype=float), np.full((len(p0), len(p0)), np.inf)
        converged, message = False, str(exc)
    errs = np.sqrt(np.abs(np.diag(pcov)))
    errors = {k: float(e) if np.isfinite(e) else math.inf for k, e in zip(names, errs)}
    vals = dict(zip(names, map(float, popt)))
    if model == "T2star" and vals["f"] < 0:
        vals["f"], vals["phi"] = -vals["f"], -vals["phi"]
    if model == "T2star":
        vals["phi"] = float((vals["phi"] + np.pi) % (2 * np.pi) - np.pi)
    fit = DecoherenceFit(model, vals["A"], vals["T"], vals["m"], vals.get("f", float("nan")),
                         vals.get("phi", float("nan")), errors, False, converged, message)
    fit.accepted = bool(converged and fit.T > 0 and fit.rel_err_T <= MAX_REL_ERR)
    return fit


def sum_of_squares(fit: DecoherenceFit, t, y) -> float:
    return float(np.sum((np.asarray(y) - fit.predict(t)) ** 2))


# -- histogram binning ----------------------------------------------------------

def doane_bins(samples) -> int:
    """K = 1 + log2 N + |g1| / sigma_g1, rounded to the nearest integer, at least 1."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 3:
        raise FitError("Doane's rule needs at least 3 samples")
    dev = x - x.mean()
    m2 = float(np.mean(dev ** 2))
    if m2 <= 1e-300 * max(1.0, float(np.max(np.abs(x))) ** 2):
        return 1
    g1 = float(np.mean(dev ** 3)) / m2 ** 1.5
    sigma_g = math.sqrt(6.0 * (n - 2) / ((n + 1) * (n + 3)))
    return max(1, int(round(1 + math.log2(n) + abs(g1) / sigma_g)))


# -- frequency bookkeeping ---------------------------------------------------------

def propagate_frequency_error(coeffs: Sequence[float], errors: Sequence[float]) -> float:
    """Root-sum-square sqrt(sum c_i^2 Err_i^2)."""
    if len(coeffs) != len(errors):
        raise FitError("coefficients and errors differ in length")
    return float(math.sqrt(sum((c * e) ** 2 for c, e in zip(coeffs, errors))))


def frequency_error_presets(table: dict = TABLE1) -> dict:
    return {
        "dF_CZ": propagate_frequency_error(
            CZ_COEFFS, (table["err_f12_hz"], table["err_f01_hz"], table["err_f_cz_hz"])),
        "dF_iSWAP": propagate_frequency_error(
            ISWAP_COEFFS, (table["err_f01_hz"], table["err_f01_hz"], table["err_f_iswap_hz"])),
    }


def detuning_presets(table: dict = TABLE1) -> dict:
    """Signed offsets of the tuned drive frequencies from the bare transition differences."""
    return {
        "dF_CZ": table["f12_q1_hz"] - table["f01_q2_hz"] - table["f_cz_hz"],
        "dF_iSWAP": (table["f01_q1_hz"] - table["f01_q2_hz"]) - table["f_iswap_hz"],
    }


# -- batch mode -------------------------------------------------------------------

BATCH_COLUMNS = ["source", "model", "A", "T_s", "f_hz", "phi_rad", "m", "err_T_frac", "accepted"]


def read_series(path) -> tuple:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(row for row in fh if not row.startswith("#")))
    if not rows or "t_s" not in rows[0] or "signal" not in rows[0]:
        raise FitError(f"{path}: need columns t_s and signal")
    return (np.array([float(r["t_s"]) for r in rows]),
            np.array([float(r["signal"]) for r in rows]))


def fit_batch(paths: Sequence, model: str, out_path) -> list:
    """Fit each CSV series and write one result row per input."""
    results = []
    for p in paths:
        t, y = read_series(p)
        results.append((Path(p).name, fit_decoherence(t, y, model)))
    with open(out_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BATCH_COLUMNS, lineterminator="\n")
        w.writeheader()
        for name, fit in results:
            w.writerow({"source": name, **{k: (repr(v) if isinstance(v, float) else v)
                                           for k, v in fit.to_row().items()}})
    return [fit for _, fit in results]
