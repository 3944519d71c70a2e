# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 integrator for f''' = -f f''."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _rhs(double f, double f1, double f2, double* d) noexcept nogil:
    d[0] = f1
    d[1] = f2
    d[2] = -f * f2


cdef void _step(double* y, double h) noexcept nogil:
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef int i
    _rhs(y[0], y[1], y[2], k1)
    _rhs(y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1], y[2] + 0.5 * h * k1[2], k2)
    _rhs(y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1], y[2] + 0.5 * h * k2[2], k3)
    _rhs(y[0] + h * k3[0], y[1] + h * k3[1], y[2] + h * k3[2], k4)
    for i in range(3):
        y[i] += h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0


def rk4_blasius_end(double s, double eta_max, int n):
    """f'(eta_max) for initial data (0, 0, s)."""
    cdef double y[3]
    cdef double h = eta_max / n
    cdef int k
    y[0] = 0.0
    y[1] = 0.0
    y[2] = s
    with nogil:
        for k in range(n):
            _step(y, h)
    return y[1]


def rk4_blasius(double s, double eta_max, int n):
    """Full trajectory, returns an (n+1, 3) array of (f, f', f'')."""
    out = np.empty((n + 1, 3), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double y[3]
    cdef double h = eta_max / n
    cdef int k
    y[0] = 0.0
    y[1] = 0.0
    y[2] = s
    o[0, 0] = 0.0
    o[0, 1] = 0.0
    o[0, 2] = s
    with nogil:
        for k in range(n):
            _step(y, h)
            o[k + 1, 0] = y[0]
            o[k + 1, 1] = y[1]
            o[k + 1, 2] = y[2]
    return out
