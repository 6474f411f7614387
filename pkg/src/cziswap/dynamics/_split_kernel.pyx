# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled step loop for the fourth-order split-operator propagator.

Mirrors ``_split_fallback.split_steps`` exactly; see that module for the
operator ordering.
"""
import numpy as np

from libc.math cimport cos, sin
from scipy.linalg.cython_blas cimport zgemm


cdef inline void _matmul(int n, int k, double complex *mat,
                         double complex *src, double complex *dst) noexcept nogil:
    cdef char trans = b'N'
    cdef double complex one = 1.0
    cdef double complex zero = 0.0
    zgemm(&trans, &trans, &n, &k, &n, &one, mat, &n, src, &n, &zero, dst, &n)


cdef inline void _phase(int n, int k, const double *levels, double theta,
                        double complex *buf, double complex *work) noexcept nogil:
    cdef int j, c
    cdef double arg
    for j in range(n):
        arg = -levels[j] * theta
        work[j] = cos(arg) + 1j * sin(arg)
    for c in range(k):
        for j in range(n):
            buf[c * n + j] = buf[c * n + j] * work[j]


def split_steps(e_first, e_mid, e_merge, levels, thetas, psi):
    """Advance ``psi`` (n, k) through ``len(thetas)`` split steps."""
    cdef double complex[::1, :] ef = np.asfortranarray(e_first, dtype=np.complex128)
    cdef double complex[::1, :] em = np.asfortranarray(e_mid, dtype=np.complex128)
    cdef double complex[::1, :] eg = np.asfortranarray(e_merge, dtype=np.complex128)
    cdef const double[::1] lev = np.ascontiguousarray(levels, dtype=np.float64)
    cdef const double[:, ::1] th = np.ascontiguousarray(thetas, dtype=np.float64).reshape(-1, 3)

    squeeze = np.ndim(psi) == 1
    out = np.array(psi, dtype=np.complex128, order="F", copy=True)
    if squeeze:
        out = out.reshape(-1, 1, order="F")
    cdef int n = out.shape[0]
    cdef int k = out.shape[1]
    cdef Py_ssize_t nsteps = th.shape[0]
    if nsteps == 0:
        return out[:, 0].copy() if squeeze else out
    if ef.shape[0] != n or lev.shape[0] != n:
        raise ValueError("operator and state dimensions disagree")

    tmp = np.empty((n, k), dtype=np.complex128, order="F")
    work_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1, :] a = out
    cdef double complex[::1, :] b = tmp
    cdef double complex[::1] work = work_arr
    cdef double complex *pa = &a[0, 0]
    cdef double complex *pb = &b[0, 0]
    cdef double complex *swap
    cdef Py_ssize_t s

    with nogil:
        _matmul(n, k, &ef[0, 0], pa, pb)
        swap = pa; pa = pb; pb = swap
        for s in range(nsteps):
            _phase(n, k, &lev[0], th[s, 0], pa, &work[0])
            _matmul(n, k, &em[0, 0], pa, pb)
            swap = pa; pa = pb; pb = swap
            _phase(n, k, &lev[0], th[s, 1], pa, &work[0])
            _matmul(n, k, &em[0, 0], pa, pb)
            swap = pa; pa = pb; pb = swap
            _phase(n, k, &lev[0], th[s, 2], pa, &work[0])
            if s + 1 < nsteps:
                _matmul(n, k, &eg[0, 0], pa, pb)
            else:
                _matmul(n, k, &ef[0, 0], pa, pb)
            swap = pa; pa = pb; pb = swap

    result = out if pa == &a[0, 0] else tmp
    return result[:, 0].copy() if squeeze else result
