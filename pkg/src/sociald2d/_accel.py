"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is picked once at import time. Set ``SOCIALD2D_DISABLE_NUMBA=1``
to force the numpy path (useful for debugging and for benchmarking the two
against each other). Both paths implement the same algorithm: a power series
for ``x < a + 1`` and a modified-Lentz continued fraction for the upper tail,
giving absolute error well below 1e-10 for the shapes the simulator uses.
"""

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 2000

NUMBA_DISABLED = os.environ.get("SOCIALD2D_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
USE_NUMBA = numba is not None and not NUMBA_DISABLED


def _maybe_njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, fastmath=False)(fn)


# --------------------------------------------------------------------------
# numba path: scalar kernels, looped over arrays inside compiled code
# --------------------------------------------------------------------------

def _gamma_series(a, x):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a, x):
    # upper regularized Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


_gamma_series = _maybe_njit(_gamma_series)
_gamma_cfrac = _maybe_njit(_gamma_cfrac)


@_maybe_njit
def _reg_lower_gamma_scalar(a, x):
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        p = _gamma_series(a, x)
    else:
        p = 1.0 - _gamma_cfrac(a, x)
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p


@_maybe_njit
def _reg_lower_gamma_loop(a, x, out):
    for i in range(x.size):
        out[i] = _reg_lower_gamma_scalar(a[i], x[i])
    return out


def reg_lower_gamma_numba(a, x):
    a, x = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(x, dtype=np.float64))
    shape = a.shape
    a = np.ascontiguousarray(a).ravel()
    x = np.ascontiguousarray(x).ravel()
    out = np.empty(a.size, dtype=np.float64)
    _reg_lower_gamma_loop(a, x, out)
    return out.reshape(shape)


# --------------------------------------------------------------------------
# numpy path: the same iterations, vectorized with active-element masks
# --------------------------------------------------------------------------

_lgamma = np.frompyfunc(math.lgamma, 1, 1)


def _log_prefactor(a, x):
    return -x + a * np.log(x) - _lgamma(a).astype(np.float64)


def _series_numpy(a, x):
    term = 1.0 / a
    total = term.copy()
    ap = a.copy()
    active = np.ones(a.shape, dtype=bool)
    for _ in range(_MAX_ITER):
        if not active.any():
            break
        ap[active] += 1.0
        term[active] *= x[active] / ap[active]
        total[active] += term[active]
        active &= ~(np.abs(term) < np.abs(total) * _EPS)
    return total * np.exp(_log_prefactor(a, x))


def _cfrac_numpy(a, x):
    b = x + 1.0 - a
    c = np.full(a.shape, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(a.shape, dtype=bool)
    for i in range(1, _MAX_ITER):
        if not active.any():
            break
        an = -i * (i - a[active])
        b[active] += 2.0
        dd = an * d[active] + b[active]
        dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
        cc = b[active] + an / c[active]
        cc = np.where(np.abs(cc) < _TINY, _TINY, cc)
        dd = 1.0 / dd
        delta = dd * cc
        d[active] = dd
        c[active] = cc
        h[active] *= delta
        done = np.abs(delta - 1.0) < _EPS
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return np.exp(_log_prefactor(a, x)) * h


def reg_lower_gamma_numpy(a, x):
    a, x = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(x, dtype=np.float64))
    a = a.astype(np.float64, copy=True)
    x = x.astype(np.float64, copy=True)
    out = np.zeros(a.shape, dtype=np.float64)
    out[np.isposinf(x)] = 1.0
    pos = (x > 0.0) & np.isfinite(x)
    low = pos & (x < a + 1.0)
    high = pos & ~low
    if low.any():
        out[low] = _series_numpy(a[low], x[low])
    if high.any():
        out[high] = 1.0 - _cfrac_numpy(a[high], x[high])
    return np.clip(out, 0.0, 1.0)


def reg_lower_gamma_array(a, x):
    """Elementwise P(a, x) using the active backend."""
    if USE_NUMBA:
        return reg_lower_gamma_numba(a, x)
    return reg_lower_gamma_numpy(a, x)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# per-session service kernels
# --------------------------------------------------------------------------

@_maybe_njit
def _best_holders_nb(holders, contents, score):
    out = np.empty(contents.size, dtype=np.int64)
    for j in range(contents.size):
        row = holders[contents[j]]
        best = -1
        best_s = -1.0
        for v in range(row.size):
            # strict > keeps the lowest id on ties
            if row[v] and score[v] >= 0.0 and score[v] > best_s:
                best = v
                best_s = score[v]
        out[j] = best
    return out


def _best_holders_np(holders, contents, score):
    if contents.size == 0:
        return np.empty(0, dtype=np.int64)
    s = np.where(holders[contents], score[None, :], -1.0)
    best = np.argmax(s, axis=1)
    best[s[np.arange(contents.size), best] < 0.0] = -1
    return best.astype(np.int64)


def best_holders(holders, contents, score):
    """Per requested content, the holder with the highest nonnegative score.

    ``holders`` is a (contents x users) bool matrix, ``score`` the requester's
    row of closeness with -1 marking users out of range or without an edge.
    Returns -1 where no holder qualifies; ties resolve to the lowest index.
    """
    contents = np.asarray(contents, dtype=np.int64)
    if USE_NUMBA:
        return _best_holders_nb(holders, contents, score)
    return _best_holders_np(holders, contents, score)


@_maybe_njit
def _d2d_session_nb(p_d2d, i_enb, noise, bits_per_hz, shape, scale, u):
    n = p_d2d.size
    total = 0.0
    for i in range(n):
        total += p_d2d[i]
    rate = np.empty(n)
    ok = np.empty(n, dtype=np.bool_)
    for i in range(n):
        r = math.log2(1.0 + p_d2d[i] / (i_enb + (total - p_d2d[i]) + noise))
        rate[i] = r
        if r > 0.0:
            x_min = bits_per_hz / r
        else:
            x_min = math.inf
        if scale[i] <= 0.0:
            w = 1.0 if shape[i] >= x_min else 0.0
        else:
            w = 1.0 - _reg_lower_gamma_scalar(shape[i], x_min / scale[i])
        ok[i] = u[i] < w
    return rate, ok


def _d2d_session_np(p_d2d, i_enb, noise, bits_per_hz, shape, scale, u):
    total = p_d2d.sum()
    rate = np.log2(1.0 + p_d2d / (i_enb + (total - p_d2d) + noise))
    with np.errstate(divide="ignore"):
        x_min = np.where(rate > 0.0, bits_per_hz / rate, np.inf)
    w = np.empty(p_d2d.size)
    degen = scale <= 0.0
    w[degen] = (shape[degen] >= x_min[degen]).astype(np.float64)
    ok_fit = ~degen
    if ok_fit.any():
        w[ok_fit] = 1.0 - reg_lower_gamma_numpy(shape[ok_fit], x_min[ok_fit] / scale[ok_fit])
    return rate, u < w


def d2d_session(p_d2d, i_enb, noise, bits_per_hz, shape, scale, u):
    """Concurrent D2D transfers into one receiver.

    Each transfer hears the eNB (``i_enb``) and every other transfer. Its
    realized rate sets the minimum contact time ``bits_per_hz / rate``; the
    transfer succeeds when ``u`` falls below the resulting closeness.
    Degenerate contact laws are flagged by ``scale <= 0`` with the point mass
    stored in ``shape``. Returns ``(rate, success)``.
    """
    if USE_NUMBA:
        return _d2d_session_nb(p_d2d, float(i_enb), float(noise), float(bits_per_hz), shape, scale, u)
    return _d2d_session_np(p_d2d, i_enb, noise, bits_per_hz, shape, scale, u)
