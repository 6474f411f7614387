"""SPAM mitigation: box-constrained least-squares inversion of a confusion matrix.

Confusion matrices are stored with prepared states as rows, T[i, j] =
P(measured j | prepared i). A true population vector x therefore produces the
measured distribution y = T^T x, and that is the forward map used here.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .readout import ConfusionMatrix

PG_TOL = 1e-10
MAX_ITER = 10_000
COND_WARN = 1e3
STOCHASTIC_TOL = 1e-9


class MitigationError(ValueError):
    pass


class IllConditionedWarning(UserWarning):
    pass


@dataclass
class Reconstruction:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool
    residual: float                       # ||y - A x||_2
    history: list = field(default_factory=list)


def forward_matrix(t, orientation: str = "rows") -> np.ndarray:
    """Matrix A with y = A x. ``orientation`` says what T's rows index: "rows" = prepared
    states (the stored convention, A = T^T) or "columns" (T already maps x to y)."""
    t = np.asarray(t.matrix if isinstance(t, ConfusionMatrix) else t, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise MitigationError("confusion matrix must be square")
    if orientation == "rows":
        sums = t.sum(axis=1)
        a = t.T
    elif orientation == "columns":
        sums = t.sum(axis=0)
        a = t
    else:
        raise MitigationError(f"unknown orientation {orientation!r}")
    if np.any(t < -STOCHASTIC_TOL) or np.abs(sums - 1).max() > STOCHASTIC_TOL:
        raise MitigationError("confusion matrix is not stochastic")
    return a


def solve_box_lsq(a: np.ndarray, y: np.ndarray, lower: float = 0.0, upper: float = 1.0,
                  tol: float = PG_TOL, max_iter: int = MAX_ITER, x0=None) -> Reconstruction:
    """min 1/2 |y - A x|^2 subject to lower <= x <= upper, by projected Newton.

    Variables at a bound whose gradient pushes outward are frozen; the rest
    take a Newton step on the reduced Hessian. An Armijo search along the
    projected path makes every iteration non-increasing in the objective.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    n = a.shape[1]
    h = a.T @ a
    aty = a.T @ y

    def obj(x):
        r = a @ x - y
        return 0.5 * float(r @ r)

    x = np.clip(np.full(n, 0.5) if x0 is None else np.asarray(x0, float), lower, upper)
    f = obj(x)
    history = [f]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = h @ x - aty
        pg = x - np.clip(x - g, lower, upper)
        if np.abs(pg).max() <= tol:
            converged = True
            it -= 1
            break
        eps = min(1e-8, float(np.abs(pg).max()))
        bound = ((x <= lower + eps) & (g > 0)) | ((x >= upper - eps) & (g < 0))
        free = ~bound
        d = -g.copy()
        if free.any():
            hf = h[np.ix_(free, free)]
            d[free] = -np.linalg.lstsq(hf, g[free], rcond=None)[0]
        step = 1.0
        while True:
            x_new = np.clip(x + step * d, lower, upper)
            f_new = obj(x_new)
            if f_new <= f - 1e-4 * float(g @ (x - x_new)) or step < 1e-12:
                break
            step *= 0.5
        if f_new > f:
            # Newton direction stalled: fall back to a projected gradient step
            lip = float(np.linalg.norm(h, 2)) or 1.0
            x_new = np.clip(x - g / lip, lower, upper)
            f_new = obj(x_new)
        x, f = x_new, min(f_new, f)
        history.append(f)
    r = a @ x - y
    return Reconstruction(x, 0.5 * float(r @ r), it, converged, float(np.linalg.norm(r)), history)


def reconstruct(y, t, *, orientation: str = "rows", normalize: bool = False) -> Reconstruction:
    """Most likely undistorted populations x for the measured distribution y."""
    y = np.asarray(y, dtype=float)
    if np.any(y < -1e-12) or np.any(y > 1 + 1e-12):
        raise MitigationError("measured probabilities outside [0, 1]")
    a = forward_matrix(t, orientation)
    if a.shape[0] != y.size:
        raise MitigationError(f"vector of length {y.size} does not match a {a.shape[0]}-state matrix")
    cond = np.linalg.cond(a)
    if cond > COND_WARN:
        warnings.warn(f"confusion matrix condition number {cond:.3g} exceeds {COND_WARN:g}",
                      IllConditionedWarning)
    res = solve_box_lsq(a, y)
    if not res.converged:
        raise MitigationError(f"reconstruction did not converge; residual {res.residual:.3g}")
    if normalize and res.x.sum() > 0:
        res.x = res.x / res.x.sum()
    return res


def mitigate_trace(trace, t, *, orientation: str = "rows", normalize: bool = False):
    """Pointwise reconstruction of a Ramsey trace's nine-state populations."""
    rows = [reconstruct(p, t, orientation=orientation, normalize=normalize).x
            for p in np.clip(trace.populations, 0.0, 1.0)]
    return trace.with_populations(np.clip(np.array(rows), 0.0, 1.0),
                                  backend=f"{trace.backend}+mitigated", mitigated=True)


def _write_rows(path, t_source: str, phi, populations, backend: str, shots) -> None:
    labels = [f"{i}{j}" for i in range(3) for j in range(3)]
    with open(path, "w", newline="") as fh:
        fh.write(f"# mitigated with confusion matrix: {t_source}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phi_rad"] + [f"p{lab}" for lab in labels] + ["backend", "shots"])
        for p, row in zip(phi, populations):
            w.writerow([repr(float(p))] + [repr(float(x)) for x in row]
                       + [backend, "" if shots is None else shots])


def write_mitigated_csv(trace, path, t_source: str) -> None:
    """Trace CSV preceded by a comment line naming the confusion matrix used."""
    _write_rows(path, t_source, trace.phi, trace.populations, trace.backend, trace.shots)


def mitigate_csv(trace_path, t: ConfusionMatrix, out_path, t_source: str) -> np.ndarray:
    """Reconstruct every row of a trace CSV and write the mitigated copy."""
    from .ramsey import read_trace_csv
    phi, pops, backend, shots = read_trace_csv(trace_path)
    x = np.clip(np.array([reconstruct(p, t).x for p in np.clip(pops, 0.0, 1.0)]), 0.0, 1.0)
    _write_rows(out_path, t_source, phi, x, f"{backend}+mitigated", shots)
    return x
