# Compiled hot kernels: row p-norms, probability ratios, counter RNG,
# IRLS weights.  Semantics match _kernels_py; the RNG is bit-identical.
#
# Powers dispatch on the exponent: integer and half-integer p up to 4 use
# multiply/sqrt chains (the exponents the pipeline actually hits), the
# rest falls back to libm pow.
import numpy as np

cimport numpy as cnp
from libc.math cimport pow, sqrt, fabs, isinf
from libc.stdint cimport uint64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15UL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9UL
cdef uint64_t MIX2 = 0x94D049BB133111EBUL
cdef double INV53 = 2.0 ** -53

DEF MODE_GENERAL = 0
DEF MODE_P1 = 1
DEF MODE_P2 = 2
DEF MODE_P3 = 3
DEF MODE_P4 = 4
DEF MODE_P05 = 5
DEF MODE_P15 = 6
DEF MODE_P25 = 7
DEF MODE_PM05 = 8


cdef inline int _pow_mode(double p) nogil:
    if p == 1.0:
        return MODE_P1
    if p == 2.0:
        return MODE_P2
    if p == 3.0:
        return MODE_P3
    if p == 4.0:
        return MODE_P4
    if p == 0.5:
        return MODE_P05
    if p == 1.5:
        return MODE_P15
    if p == 2.5:
        return MODE_P25
    if p == -0.5:
        return MODE_PM05
    return MODE_GENERAL


cdef inline double _pw(double x, double p, int mode) nogil:
    # x >= 0
    if mode == MODE_P1:
        return x
    if mode == MODE_P2:
        return x * x
    if mode == MODE_P3:
        return x * x * x
    if mode == MODE_P4:
        return (x * x) * (x * x)
    if mode == MODE_P05:
        return sqrt(x)
    if mode == MODE_P15:
        return x * sqrt(x)
    if mode == MODE_P25:
        return x * x * sqrt(x)
    if mode == MODE_PM05:
        return 1.0 / sqrt(x)
    return pow(x, p)


cdef inline uint64_t _mix(uint64_t x) nogil:
    x = (x ^ (x >> 30)) * MIX1
    x = (x ^ (x >> 27)) * MIX2
    return x ^ (x >> 31)


cdef double _pnorm_raw(const double* a, Py_ssize_t n, double p, int mode) nogil:
    cdef Py_ssize_t i
    cdef double m = 0.0, s = 0.0, v
    if n == 0:
        return 0.0
    if mode == MODE_P1:
        for i in range(n):
            s += fabs(a[i])
        return s
    for i in range(n):
        v = fabs(a[i])
        if v > m:
            m = v
    if m == 0.0 or isinf(p):
        return m
    for i in range(n):
        s += _pw(fabs(a[i]) / m, p, mode)
    if mode == MODE_P2:
        return m * sqrt(s)
    return m * pow(s, 1.0 / p)


def pnorm(v, double p):
    """Entrywise p-norm of a 1-D array, scaled by max|v| to avoid overflow."""
    cdef cnp.ndarray[double, ndim=1] a = np.ascontiguousarray(
        np.asarray(v, dtype=np.float64).ravel())
    return _pnorm_raw(&a[0] if a.shape[0] else NULL, a.shape[0], p, _pow_mode(p))


def row_pnorms(M, double p):
    """Per-row p-norms of a 2-D array, each row scaled by its own max."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] a = np.ascontiguousarray(
        np.asarray(M, dtype=np.float64))
    cdef Py_ssize_t i, n = a.shape[0], m = a.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef int mode = _pow_mode(p)
    with nogil:
        for i in range(n):
            out[i] = _pnorm_raw(&a[i, 0] if m else NULL, m, p, mode)
    return out


def powsum_ratios(vals, double p, weights=None):
    """Normalized vals_i^p (optionally weighted): w_i*vals_i^p / sum_j w_j*vals_j^p."""
    cdef cnp.ndarray[double, ndim=1] a = np.ascontiguousarray(
        np.asarray(vals, dtype=np.float64))
    cdef cnp.ndarray[double, ndim=1] w
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double t = 0.0, total = 0.0
    cdef cnp.ndarray[double, ndim=1] r = np.empty(n, dtype=np.float64)
    cdef int mode = _pow_mode(p)
    for i in range(n):
        if a[i] > t:
            t = a[i]
    if t <= 0.0:
        raise ValueError("powsum_ratios: all values are zero")
    for i in range(n):
        r[i] = _pw(a[i] / t, p, mode)
    if weights is not None:
        w = np.ascontiguousarray(np.asarray(weights, dtype=np.float64))
        for i in range(n):
            r[i] = r[i] * w[i]
    for i in range(n):
        total += r[i]
    if total <= 0.0:
        raise ValueError("powsum_ratios: zero total weight")
    for i in range(n):
        r[i] /= total
    return r


def counter_uniforms(seed, Py_ssize_t n):
    """n uniforms in [0,1) from a splitmix64 counter stream keyed by seed."""
    cdef uint64_t s = <uint64_t> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    cdef uint64_t x
    with nogil:
        for i in range(n):
            x = _mix(s + (<uint64_t> (i + 1)) * GOLDEN)
            out[i] = <double> (x >> 11) * INV53
    return out


def smoothed_power_weights(residuals, double mu, double p):
    """IRLS weights (r_i^2 + mu^2)^((p-2)/2) for the smoothed p-th power loss."""
    cdef cnp.ndarray[double, ndim=1] r = np.ascontiguousarray(
        np.asarray(residuals, dtype=np.float64).ravel())
    cdef Py_ssize_t i, n = r.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double e = (p - 2.0) / 2.0
    cdef int mode = _pow_mode(e)
    with nogil:
        for i in range(n):
            out[i] = _pw(r[i] * r[i] + mu * mu, e, mode)
    return out
