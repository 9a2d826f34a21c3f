"""Hot inner loops, each in a numba and a pure-numpy flavour.

The public names (``pattern_indices``, ``event_pair_extrema``,
``multiaffine_eval``) dispatch on :data:`negdep._accel.USE_NUMBA`. Both
flavours are always importable so tests and the benchmark can compare them.

Pattern convention everywhere: coordinate ``k`` (0-based) is bit ``k`` of the
integer pattern index.
"""
import numpy as np

from negdep._accel import USE_NUMBA, njit

# exhaustive event enumeration visits 2**(2**a) * 2**(2**b) pairs
MAX_EVENT_PAIR_BITS = 24


# -- Monte Carlo pattern indexing ------------------------------------------------

def pattern_indices_numpy(z, thresholds):
    z = np.asarray(z, dtype=np.float64)
    weights = np.left_shift(np.int64(1), np.arange(z.shape[1], dtype=np.int64))
    return (z >= thresholds).astype(np.int64) @ weights


@njit(cache=True)
def pattern_indices_numba(z, thresholds):
    m, n = z.shape
    out = np.empty(m, dtype=np.int64)
    for r in range(m):
        idx = 0
        for k in range(n):
            if z[r, k] >= thresholds[k]:
                idx |= 1 << k
        out[r] = idx
    return out


# -- exhaustive event-pair covariance extrema -----------------------------------

def _indicator_rows(k):
    """Row ``m`` is the 0/1 membership vector of subset-mask ``m`` of ``k`` atoms."""
    masks = np.arange(1 << k, dtype=np.int64)
    return ((masks[:, None] >> np.arange(k)) & 1).astype(np.float64)


def event_pair_extrema_numpy(D, chunk=4096):
    D = np.ascontiguousarray(D, dtype=np.float64)
    r, c = D.shape
    if r + c > MAX_EVENT_PAIR_BITS:
        raise ValueError("event space too large for exhaustive enumeration")
    IF = _indicator_rows(c)
    hi, lo = -np.inf, np.inf
    for start in range(0, 1 << r, chunk):
        stop = min(start + chunk, 1 << r)
        masks = np.arange(start, stop, dtype=np.int64)
        IE = ((masks[:, None] >> np.arange(r)) & 1).astype(np.float64)
        S = (IE @ D) @ IF.T
        hi = max(hi, float(S.max()))
        lo = min(lo, float(S.min()))
    return hi, lo


@njit(cache=True)
def event_pair_extrema_numba(D):
    r, c = D.shape
    hi = -np.inf
    lo = np.inf
    w = np.empty(c)
    for e in range(1 << r):
        for y in range(c):
            acc = 0.0
            for x in range(r):
                if (e >> x) & 1:
                    acc += D[x, y]
            w[y] = acc
        # Gray-code walk over column subsets
        s = 0.0
        gray = 0
        if s > hi:
            hi = s
        if s < lo:
            lo = s
        for t in range(1, 1 << c):
            bit = 0
            tt = t
            while (tt & 1) == 0:
                tt >>= 1
                bit += 1
            if (gray >> bit) & 1:
                s -= w[bit]
            else:
                s += w[bit]
            gray ^= 1 << bit
            if s > hi:
                hi = s
            if s < lo:
                lo = s
    return hi, lo


def _event_pair_extrema_numba(D):
    D = np.ascontiguousarray(D, dtype=np.float64)
    if D.shape[0] + D.shape[1] > MAX_EVENT_PAIR_BITS:
        raise ValueError("event space too large for exhaustive enumeration")
    hi, lo = event_pair_extrema_numba(D)
    return float(hi), float(lo)


# -- multiaffine polynomial evaluation -------------------------------------------

def multiaffine_eval_numpy(coeffs, points):
    """Evaluate sum_S c_S prod_{k in S} z_k at each row of ``points``.

    Halving scheme: after folding coordinate k, entry ``m`` of the running vector
    holds the partial evaluation for the remaining coordinates ``m``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.complex128))
    v = np.repeat(np.asarray(coeffs, dtype=np.complex128)[:, None], pts.shape[0], axis=1)
    for k in range(pts.shape[1]):
        v = v[0::2] + pts[:, k] * v[1::2]
    return v[0]


@njit(cache=True)
def multiaffine_eval_numba(coeffs, points):
    m, n = points.shape
    out = np.empty(m, dtype=np.complex128)
    buf = np.empty(coeffs.shape[0], dtype=np.complex128)
    for r in range(m):
        for s in range(coeffs.shape[0]):
            buf[s] = coeffs[s]
        size = coeffs.shape[0]
        for k in range(n):
            half = size >> 1
            zk = points[r, k]
            for s in range(half):
                buf[s] = buf[2 * s] + zk * buf[2 * s + 1]
            size = half
        out[r] = buf[0]
    return out


def _multiaffine_eval_numba(coeffs, points):
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=np.complex128)))
    c = np.ascontiguousarray(np.asarray(coeffs, dtype=np.complex128))
    return multiaffine_eval_numba(c, pts)


def _pattern_indices_numba(z, thresholds):
    return pattern_indices_numba(
        np.ascontiguousarray(z, dtype=np.float64),
        np.ascontiguousarray(thresholds, dtype=np.float64),
    )


if USE_NUMBA:
    pattern_indices = _pattern_indices_numba
    event_pair_extrema = _event_pair_extrema_numba
    multiaffine_eval = _multiaffine_eval_numba
else:
    pattern_indices = pattern_indices_numpy
    event_pair_extrema = event_pair_extrema_numpy
    multiaffine_eval = multiaffine_eval_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
