"""Pure-numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or explicitly disabled
via LPC_PURE_PYTHON=1.  Function signatures and semantics match
``_kernels_c`` exactly; the counter-based RNG is bit-identical across
backends (pure uint64 arithmetic).
"""
import numpy as np

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = _U64(30), _U64(27), _U64(31), _U64(11)
_INV53 = 2.0 ** -53


def pnorm(v, p):
    """Entrywise p-norm of a 1-D array, scaled by max|v| to avoid overflow."""
    a = np.abs(np.asarray(v, dtype=np.float64)).ravel()
    if a.size == 0:
        return 0.0
    if p == 1.0:
        return float(a.sum())
    m = float(a.max())
    if m == 0.0 or np.isinf(p):
        return m
    s = a / m
    if p == 2.0:
        return m * float(np.sqrt(s @ s))
    return m * float(np.sum(s**p)) ** (1.0 / p)


def row_pnorms(M, p):
    """Per-row p-norms of a 2-D array, each row scaled by its own max."""
    a = np.abs(np.asarray(M, dtype=np.float64))
    if a.ndim != 2:
        raise ValueError("row_pnorms expects a 2-D array")
    if a.shape[1] == 0:
        return np.zeros(a.shape[0])
    if p == 1.0:
        return a.sum(axis=1)
    m = a.max(axis=1)
    if np.isinf(p):
        return m
    safe = np.where(m > 0.0, m, 1.0)
    s = a / safe[:, None]
    if p == 2.0:
        out = np.sqrt(np.einsum("ij,ij->i", s, s))
    else:
        out = np.sum(s**p, axis=1) ** (1.0 / p)
    return np.where(m > 0.0, m * out, 0.0)


def powsum_ratios(vals, p, weights=None):
    """Normalized vals_i^p (optionally weighted): w_i*vals_i^p / sum_j w_j*vals_j^p.

    vals must be nonnegative with at least one strictly positive weighted
    entry; computed after dividing by max(vals) so large p cannot overflow.
    """
    a = np.asarray(vals, dtype=np.float64)
    t = float(a.max()) if a.size else 0.0
    if t <= 0.0:
        raise ValueError("powsum_ratios: all values are zero")
    r = (a / t) ** p
    if weights is not None:
        r = r * np.asarray(weights, dtype=np.float64)
    total = float(r.sum())
    if total <= 0.0:
        raise ValueError("powsum_ratios: zero total weight")
    return r / total


def counter_uniforms(seed, n):
    """n uniforms in [0,1) from a splitmix64 counter stream keyed by seed.

    Draw i depends only on (seed, i), so plans are reproducible and
    row-parallel.
    """
    idx = np.arange(1, n + 1, dtype=np.uint64)
    x = _U64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN
    x = (x ^ (x >> _S30)) * _MIX1
    x = (x ^ (x >> _S27)) * _MIX2
    x = x ^ (x >> _S31)
    return (x >> _S11).astype(np.float64) * _INV53


def smoothed_power_weights(residuals, mu, p):
    """IRLS weights (r_i^2 + mu^2)^((p-2)/2) for the smoothed p-th power loss."""
    r = np.asarray(residuals, dtype=np.float64)
    return (r * r + mu * mu) ** ((p - 2.0) / 2.0)
