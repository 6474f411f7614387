"""Pure-numpy step loop for the fourth-order split-operator propagator.

One step of length h is the Yoshida triple-jump composition of the symmetric
Strang step ``E(c/2) . P(theta) . E(c/2)`` with weights (w1, w0, w1).
``E(c) = exp(-i A c h)`` is the static propagator and ``P(theta)`` the exact
flow of the time-dependent diagonal term, ``exp(-i levels * theta)``, where
``theta`` is the integral of the coupler frequency excursion over the substep.

Adjacent half-steps of consecutive steps are merged, so a run of ``nsteps``
steps costs ``3 * nsteps + 1`` matrix products.
"""

from __future__ import annotations

import numpy as np


def split_steps(e_first, e_mid, e_merge, levels, thetas, psi):
    """Advance ``psi`` through ``len(thetas)`` steps.

    Args:
        e_first: exp(-i A w1 h / 2), applied at both ends of the run.
        e_mid: exp(-i A (w1 + w0) h / 2), applied twice inside every step.
        e_merge: exp(-i A w1 h), the two merged outer halves between steps.
        levels: diagonal of the modulated operator (coupler occupation).
        thetas: array (nsteps, 3) of phase integrals per substep.
        psi: state vector (n,) or block of columns (n, k).
    """
    thetas = np.asarray(thetas, dtype=float).reshape(-1, 3)
    out = np.array(psi, dtype=complex, copy=True)
    if len(thetas) == 0:
        return out
    levels = np.asarray(levels, dtype=float)
    col = (slice(None),) + (None,) * (out.ndim - 1)
    out = e_first @ out
    last = len(thetas) - 1
    for s, (t0, t1, t2) in enumerate(thetas):
        out = out * np.exp(-1j * levels * t0)[col]
        out = e_mid @ out
        out = out * np.exp(-1j * levels * t1)[col]
        out = e_mid @ out
        out = out * np.exp(-1j * levels * t2)[col]
        out = (e_merge if s < last else e_first) @ out
    return out
