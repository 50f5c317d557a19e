"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Every kernel exists twice: ``<name>_numpy`` (vectorised numpy, always
available) and ``<name>_numba`` (``@njit`` compiled loops).  The public
name (``<name>``) is bound to one of them at import time.

Set ``IMPSTAB_DISABLE_NUMBA=1`` to force the numpy path.  The benchmark in
``benchmarks/bench_kernels.py`` times both paths against each other, and the
test-suite checks they agree.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_flag = os.environ.get("IMPSTAB_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no", "off")
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV

if HAVE_NUMBA:
    njit = numba.njit(cache=True, nogil=True)
else:  # pragma: no cover
    def njit(fn):
        return fn


# ---------------------------------------------------------------------------
# factored-form evaluation:  gain * prod(s - z) / prod(s - p)
# ---------------------------------------------------------------------------

def eval_factored_numpy(s, gain, zeros, poles):
    s = np.asarray(s, dtype=np.complex128)
    out = np.full(s.shape, complex(gain), dtype=np.complex128)
    nz, npl = len(zeros), len(poles)
    # interleave multiply/divide to keep intermediate magnitudes bounded
    for k in range(max(nz, npl)):
        if k < nz:
            out *= s - zeros[k]
        if k < npl:
            out /= s - poles[k]
    return out


@njit
def _eval_factored_nb(s, gain, zeros, poles):
    out = np.empty(s.shape[0], dtype=np.complex128)
    nz = zeros.shape[0]
    npl = poles.shape[0]
    m = max(nz, npl)
    for i in range(s.shape[0]):
        v = gain + 0j
        si = s[i]
        for k in range(m):
            if k < nz:
                v *= si - zeros[k]
            if k < npl:
                v /= si - poles[k]
        out[i] = v
    return out


def eval_factored_numba(s, gain, zeros, poles):
    s = np.asarray(s, dtype=np.complex128)
    flat = np.ascontiguousarray(s.ravel())
    out = _eval_factored_nb(flat, complex(gain),
                            np.ascontiguousarray(zeros, dtype=np.complex128),
                            np.ascontiguousarray(poles, dtype=np.complex128))
    return out.reshape(s.shape)


# ---------------------------------------------------------------------------
# logarithmic derivative p'/p of a sum of factored products
#   p(z) = sum_k c_k prod_j (z - r_kj)
# terms are packed as (gains[K], roots_flat, offsets[K+1])
# ---------------------------------------------------------------------------

def sum_dlog_numpy(z, gains, roots_flat, offsets):
    z = np.asarray(z, dtype=np.complex128)
    K = len(gains)
    logt = np.empty((K, z.size), dtype=np.complex128)
    dsum = np.zeros((K, z.size), dtype=np.complex128)
    for k in range(K):
        r = roots_flat[offsets[k]:offsets[k + 1]]
        if r.size:
            diff = z[:, None] - r[None, :]
            # an iterate sitting exactly on a term root: nudge it off
            diff = np.where(diff == 0, 1e-15 * (np.abs(z)[:, None] + 1.0), diff)
            with np.errstate(divide="ignore", invalid="ignore"):
                logt[k] = np.log(diff).sum(axis=1) + np.log(gains[k])
                dsum[k] = (1.0 / diff).sum(axis=1)
        else:
            logt[k] = np.log(gains[k])
    m = np.max(logt.real, axis=0)
    m = np.where(np.isfinite(m), m, 0.0)
    w = np.exp(logt - m)
    p = w.sum(axis=0)
    dp = (w * dsum).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return dp / p


@njit
def _sum_dlog_point(z, gains, roots_flat, offsets):
    K = gains.shape[0]
    logt = np.empty(K, dtype=np.complex128)
    dsum = np.zeros(K, dtype=np.complex128)
    m = -np.inf
    for k in range(K):
        acc = np.log(gains[k])
        d = 0j
        for j in range(offsets[k], offsets[k + 1]):
            diff = z - roots_flat[j]
            if diff == 0:
                diff = 1e-15 * (abs(z) + 1.0) + 0j
            acc += np.log(diff)
            d += 1.0 / diff
        logt[k] = acc
        dsum[k] = d
        if acc.real > m:
            m = acc.real
    if not np.isfinite(m):
        m = 0.0
    p = 0j
    dp = 0j
    for k in range(K):
        w = np.exp(logt[k] - m)
        p += w
        dp += w * dsum[k]
    if p == 0:
        return complex(np.inf, 0.0)
    return dp / p


@njit
def _sum_dlog_nb(z, gains, roots_flat, offsets):
    out = np.empty(z.shape[0], dtype=np.complex128)
    for i in range(z.shape[0]):
        out[i] = _sum_dlog_point(z[i], gains, roots_flat, offsets)
    return out


def sum_dlog_numba(z, gains, roots_flat, offsets):
    z = np.ascontiguousarray(np.asarray(z, dtype=np.complex128).ravel())
    return _sum_dlog_nb(z, gains, roots_flat, offsets)


# ---------------------------------------------------------------------------
# Aberth-Ehrlich simultaneous root polishing for a sum of factored products
# ---------------------------------------------------------------------------

def aberth_numpy(z0, gains, roots_flat, offsets, maxiter=60, tol=1e-15):
    z = np.array(z0, dtype=np.complex128)
    n = z.size
    if n == 0:
        return z
    scale = max(1e-300, float(np.max(np.abs(z))))
    for _ in range(maxiter):
        ratio = sum_dlog_numpy(z, gains, roots_flat, offsets)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        s = inv.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = 1.0 / (ratio - s)
        w = np.where(np.isfinite(w), w, 0.0)
        z = z - w
        rel = np.abs(w) / np.maximum(np.abs(z), 1e-3 * scale)
        if rel.max() <= tol:
            break
    return z


@njit
def _aberth_nb(z0, gains, roots_flat, offsets, maxiter, tol):
    z = z0.copy()
    n = z.shape[0]
    if n == 0:
        return z
    scale = 0.0
    for i in range(n):
        if abs(z[i]) > scale:
            scale = abs(z[i])
    if scale < 1e-300:
        scale = 1e-300
    w = np.empty(n, dtype=np.complex128)
    for _ in range(maxiter):
        for i in range(n):
            ratio = _sum_dlog_point(z[i], gains, roots_flat, offsets)
            s = 0j
            for j in range(n):
                if j != i:
                    d = z[i] - z[j]
                    if d != 0:
                        s += 1.0 / d
            den = ratio - s
            if den != 0 and np.isfinite(den.real) and np.isfinite(den.imag):
                w[i] = 1.0 / den
            else:
                w[i] = 0j
        worst = 0.0
        for i in range(n):
            z[i] -= w[i]
            floor = 1e-3 * scale
            a = abs(z[i])
            rel = abs(w[i]) / (a if a > floor else floor)
            if rel > worst:
                worst = rel
        if worst <= tol:
            break
    return z


def aberth_numba(z0, gains, roots_flat, offsets, maxiter=60, tol=1e-15):
    return _aberth_nb(np.ascontiguousarray(z0, dtype=np.complex128), gains,
                      roots_flat, offsets, int(maxiter), float(tol))


# ---------------------------------------------------------------------------
# greedy nearest matching of two root multisets within a relative tolerance
# returns arrays (ia, ib) of matched indices
# ---------------------------------------------------------------------------

def greedy_match_numpy(a, b, tol):
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.size == 0 or b.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    dist = np.abs(a[:, None] - b[None, :])
    scale = np.maximum(1.0, np.maximum(np.abs(a)[:, None], np.abs(b)[None, :]))
    ok = dist <= tol * scale
    order = np.argsort(dist, axis=None, kind="stable")
    used_a = np.zeros(a.size, bool)
    used_b = np.zeros(b.size, bool)
    ia, ib = [], []
    for flat in order:
        i, j = divmod(int(flat), b.size)
        if not ok[i, j]:
            # sorted by distance, but tolerance is relative; keep scanning
            continue
        if used_a[i] or used_b[j]:
            continue
        used_a[i] = used_b[j] = True
        ia.append(i)
        ib.append(j)
    return np.array(ia, np.int64), np.array(ib, np.int64)


@njit
def _greedy_match_nb(a, b, tol):
    na = a.shape[0]
    nb = b.shape[0]
    dist = np.empty(na * nb)
    ok = np.empty(na * nb, dtype=np.bool_)
    for i in range(na):
        for j in range(nb):
            d = abs(a[i] - b[j])
            sc = max(1.0, abs(a[i]), abs(b[j]))
            dist[i * nb + j] = d
            ok[i * nb + j] = d <= tol * sc
    order = np.argsort(dist, kind="mergesort")
    used_a = np.zeros(na, dtype=np.bool_)
    used_b = np.zeros(nb, dtype=np.bool_)
    ia = np.empty(min(na, nb), dtype=np.int64)
    ib = np.empty(min(na, nb), dtype=np.int64)
    cnt = 0
    for t in range(order.shape[0]):
        flat = order[t]
        if not ok[flat]:
            continue
        i = flat // nb
        j = flat % nb
        if used_a[i] or used_b[j]:
            continue
        used_a[i] = True
        used_b[j] = True
        ia[cnt] = i
        ib[cnt] = j
        cnt += 1
    return ia[:cnt], ib[:cnt]


def greedy_match_numba(a, b, tol):
    a = np.ascontiguousarray(a, dtype=np.complex128)
    b = np.ascontiguousarray(b, dtype=np.complex128)
    if a.size == 0 or b.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return _greedy_match_nb(a, b, float(tol))


# ---------------------------------------------------------------------------
# Leverrier-Faddeev: characteristic polynomial and adjugate coefficients
#   det(sI - A) = sum_k c[k] s^(n-k),  c[0] = 1
#   adj(sI - A) = sum_{k=0}^{n-1} M[k] s^(n-1-k)
# ---------------------------------------------------------------------------

def leverrier_numpy(A):
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    c = np.zeros(n + 1)
    c[0] = 1.0
    M = np.zeros((max(n, 1), n, n))
    if n == 0:
        return c, M[:0]
    Mk = np.eye(n)
    for k in range(1, n + 1):
        M[k - 1] = Mk
        AM = A @ Mk
        c[k] = -np.trace(AM) / k
        Mk = AM + c[k] * np.eye(n)
    return c, M


@njit
def _leverrier_nb(A):
    n = A.shape[0]
    c = np.zeros(n + 1)
    c[0] = 1.0
    M = np.zeros((n, n, n))
    Mk = np.eye(n)
    for k in range(1, n + 1):
        M[k - 1] = Mk
        AM = A @ Mk
        tr = 0.0
        for i in range(n):
            tr += AM[i, i]
        c[k] = -tr / k
        Mk = AM.copy()
        for i in range(n):
            Mk[i, i] += c[k]
    return c, M


def leverrier_numba(A):
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.shape[0] == 0:
        return leverrier_numpy(A)
    return _leverrier_nb(A)


# ---------------------------------------------------------------------------
# phase increments of a sampled locus about a point
# ---------------------------------------------------------------------------

def phase_increments_numpy(values, about):
    d = np.asarray(values, dtype=np.complex128) - about
    return np.angle(d[1:] / d[:-1])


@njit
def _phase_increments_nb(values, about):
    n = values.shape[0]
    out = np.empty(max(n - 1, 0))
    for k in range(n - 1):
        a = values[k] - about
        b = values[k + 1] - about
        q = b / a
        out[k] = np.arctan2(q.imag, q.real)
    return out


def phase_increments_numba(values, about):
    return _phase_increments_nb(np.ascontiguousarray(values, dtype=np.complex128),
                                complex(about))


# ---------------------------------------------------------------------------
# central-difference logarithmic derivative  (g[k+1] - g[k-1]) / (2 h g[k])
# ---------------------------------------------------------------------------

def central_logderiv_numpy(g, step):
    g = np.asarray(g, dtype=np.complex128)
    n = g.size
    out = np.empty(n, dtype=np.complex128)
    with np.errstate(divide="ignore", invalid="ignore"):
        if n >= 3:
            out[1:-1] = (g[2:] - g[:-2]) / (2.0 * step * g[1:-1])
        if n >= 2:
            out[0] = (g[1] - g[0]) / (step * g[0])
            out[-1] = (g[-1] - g[-2]) / (step * g[-1])
        else:
            out[:] = 0.0
    return out


@njit
def _central_logderiv_nb(g, step):
    n = g.shape[0]
    out = np.empty(n, dtype=np.complex128)
    if n < 2:
        for k in range(n):
            out[k] = 0j
        return out
    for k in range(1, n - 1):
        out[k] = (g[k + 1] - g[k - 1]) / (2.0 * step * g[k])
    out[0] = (g[1] - g[0]) / (step * g[0])
    out[n - 1] = (g[n - 1] - g[n - 2]) / (step * g[n - 1])
    return out


def central_logderiv_numba(g, step):
    return _central_logderiv_nb(np.ascontiguousarray(g, dtype=np.complex128),
                                float(step))


# ---------------------------------------------------------------------------
# branch tracking for two eigenvalue sequences: swap when that is closer
# ---------------------------------------------------------------------------

def track_branches_numpy(l1, l2):
    # inherently sequential; the "numpy" path is a plain loop
    a = np.array(l1, dtype=np.complex128)
    b = np.array(l2, dtype=np.complex128)
    for k in range(1, a.size):
        keep = abs(a[k] - a[k - 1]) + abs(b[k] - b[k - 1])
        swap = abs(b[k] - a[k - 1]) + abs(a[k] - b[k - 1])
        if swap < keep:
            a[k], b[k] = b[k], a[k]
    return a, b


@njit
def _track_branches_nb(a, b):
    for k in range(1, a.shape[0]):
        keep = abs(a[k] - a[k - 1]) + abs(b[k] - b[k - 1])
        swap = abs(b[k] - a[k - 1]) + abs(a[k] - b[k - 1])
        if swap < keep:
            t = a[k]
            a[k] = b[k]
            b[k] = t
    return a, b


def track_branches_numba(l1, l2):
    return _track_branches_nb(np.array(l1, dtype=np.complex128),
                              np.array(l2, dtype=np.complex128))


_NAMES = ("eval_factored", "sum_dlog", "aberth", "greedy_match", "leverrier",
          "phase_increments", "central_logderiv", "track_branches")


def implementations(name):
    """Return ``(numpy_impl, numba_impl_or_None)`` for a kernel name."""
    g = globals()
    return g[name + "_numpy"], (g[name + "_numba"] if HAVE_NUMBA else None)


def _bind(use_numba):
    g = globals()
    suffix = "_numba" if use_numba else "_numpy"
    for name in _NAMES:
        g[name] = g[name + suffix]


_bind(USE_NUMBA)
