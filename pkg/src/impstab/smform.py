"""Smith-McMillan reduction and determinant identities for return ratios.

Polynomial GCDs are computed as intersections of root multisets, never by
Euclid's algorithm on floating-point coefficients.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonSquare, ZeroMatrix
from .ratfun import (TOL_CANCEL, TOL_MERGE, FactoredPoly, PolySum, RatFun, RatSum,
                     cancel, multiset_difference, multiset_intersection, split_rhp)
from .statespace import RatMatrix, det_of_sums


@dataclass(frozen=True)
class SmithMcMillan:
    """``m = U diag(k_i eps_i / delta_i) V`` with unimodular ``U``, ``V``.

    ``eps`` and ``delta`` are monic.  All gains but the last are one; the
    last absorbs the scalar so that ``det m = prod(k) * prod(eps/delta)``.
    """

    eps: tuple
    delta: tuple
    k: tuple
    chi: tuple
    reordered: bool = False
    rank: int = 0

    def diagonal(self):
        return [RatFun(FactoredPoly(k, e.roots), d) for k, e, d in zip(self.k, self.eps, self.delta)]

    def det(self, s):
        out = np.ones_like(np.asarray(s, dtype=np.complex128))
        for d in self.diagonal():
            out = out * d(s)
        return out


def numerator_matrix(m: RatMatrix):
    """Polynomial matrix ``N = m * D`` with ``D`` the least common denominator."""
    D = m.common_den
    N = []
    for row in m.entries:
        out = []
        for e in row:
            if e.is_zero:
                out.append(FactoredPoly.zero())
                continue
            extra, leftover = multiset_difference(D.roots, e.poles, TOL_MERGE)
            out.append(FactoredPoly(e.gain, np.concatenate([e.zeros, extra]), e.real_coeffs))
        N.append(out)
    return D, N


def _minor(N, rows, cols):
    sub = [[PolySum.of(N[r][c]) for c in cols] for r in rows]
    total = PolySum()
    for perm in itertools.permutations(range(len(rows))):
        sign = 1.0
        p = list(perm)
        for i in range(len(p)):
            while p[i] != i:
                j = p[i]
                p[i], p[j] = p[j], p[i]
                sign = -sign
        term = PolySum.of(sign)
        for i, j in enumerate(perm):
            term = term * sub[i][j]
        total = total + term
    return total.factor()


def _gcd(polys, tol):
    polys = [p for p in polys if not p.is_zero]
    if not polys:
        return None
    roots = polys[0].roots
    for p in polys[1:]:
        roots = multiset_intersection(roots, p.roots, tol)
    return FactoredPoly(1.0, roots, all(p.real_coeffs for p in polys))


def smith_mcmillan(m: RatMatrix, tol_cancel: float = TOL_CANCEL) -> SmithMcMillan:
    """Smith-McMillan form of a square rational matrix."""
    n, q = m.shape
    if n != q:
        raise NonSquare(f"Smith-McMillan form needs a square matrix, got {m.shape}")
    D, N = numerator_matrix(m)
    real = m.real_coeffs
    chi = [FactoredPoly(1.0)]
    for i in range(1, n + 1):
        idx = list(itertools.combinations(range(n), i))
        g = _gcd([_minor(N, r, c) for r in idx for c in idx], tol_cancel)
        if g is None:
            if i == 1:
                raise ZeroMatrix("all entries are identically zero")
            break
        chi.append(g)
    rank = len(chi) - 1

    eps, delta = [], []
    for i in range(1, rank + 1):
        e_roots, _ = multiset_difference(chi[i].roots, chi[i - 1].roots, tol_cancel)
        red = cancel(RatFun(FactoredPoly(1.0, e_roots, real), D), tol_cancel)
        eps.append(FactoredPoly(1.0, red.zeros, real))
        delta.append(red.den)
    for _ in range(rank, n):
        eps.append(FactoredPoly.zero())
        delta.append(FactoredPoly(1.0))

    # enforce delta_{i+1} | delta_i (largest denominator first)
    order = sorted(range(rank), key=lambda i: (-delta[i].degree, eps[i].degree, i))
    reordered = order != list(range(rank))
    eps = [eps[i] for i in order] + eps[rank:]
    delta = [delta[i] for i in order] + delta[rank:]

    k = [1.0] * n
    if rank == n:
        s0 = _probe_for(m, eps, delta)
        num = complex(m.det(tol_cancel)(s0))
        den = 1.0 + 0j
        for e, d in zip(eps, delta):
            den *= complex(e(s0)) / complex(d(s0))
        kn = num / den
        k[-1] = kn.real if real else kn
    return SmithMcMillan(tuple(eps), tuple(delta), tuple(k), tuple(chi), reordered, rank)


def _probe_for(m, eps, delta):
    roots = [e.roots for e in eps] + [d.roots for d in delta]
    roots += [x.zeros for row in m.entries for x in row]
    allr = np.concatenate(roots) if roots else np.empty(0)
    mags = np.abs(allr[allr != 0])
    scale = float(np.exp(np.mean(np.log(mags)))) if mags.size else 1.0
    best, best_d = None, -1.0
    for theta in (0.77, 1.93, 2.61, 0.31, 2.29):
        s0 = 1.41 * scale * np.exp(1j * theta)
        d = np.min(np.abs(s0 - allr)) if allr.size else 1.0
        if d > best_d:
            best, best_d = s0, d
    return best


def matrix_zeros_poles(sm: SmithMcMillan):
    """Zeros (roots of prod eps) and poles (roots of prod delta)."""
    zeros = [e.roots for e in sm.eps if not e.is_zero]
    poles = [d.roots for d in sm.delta]
    cat = lambda xs: np.sort(np.concatenate(xs)) if xs else np.empty(0, np.complex128)
    return cat(zeros), cat(poles)


def diagonal_return_difference(sm: SmithMcMillan) -> RatFun:
    """``prod (delta_i + k_i eps_i) / delta_i``, i.e. ``det(I + S)`` for the diagonal form.

    This equals ``det(I + m)`` only when the unimodular factors of ``m``
    cancel (diagonal or commuting cases).  In general ``det(I + U S V)``
    differs from ``det(I + S)``; ``det(m)`` itself is always
    ``prod(k) prod(eps/delta)``.
    """
    total = RatSum.of(1.0)
    for k, e, d in zip(sm.k, sm.eps, sm.delta):
        term = RatSum([(k, e.roots, d.roots)]) + 1.0 if not e.is_zero else RatSum.of(1.0)
        total = total * term
    return total.to_ratfun()


def _check_pair(a: RatMatrix, b: RatMatrix):
    if a.shape[1] != b.shape[0] or a.shape[0] != b.shape[1] or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"incompatible shapes {a.shape} and {b.shape}")


def det_return_ratio(zg: RatMatrix, yc: RatMatrix, tol_cancel: float = TOL_CANCEL) -> RatFun:
    """``det(I + Z_g Y_c)`` rooted once from a flat expansion, then cancelled."""
    _check_pair(zg, yc)
    n = zg.shape[0]
    Z, Y = zg.sums(), yc.sums()
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = RatSum.of(1.0 if i == j else 0.0)
            for t in range(n):
                acc = acc + Z[i][t] * Y[t][j]
            row.append(acc)
        rows.append(row)
    return det_of_sums(rows).to_ratfun(tol_cancel)


def det_sum(a: RatMatrix, b: RatMatrix, tol_cancel: float = TOL_CANCEL) -> RatFun:
    """``det(a + b)`` from a flat expansion."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"incompatible shapes {a.shape} and {b.shape}")
    A, B = a.sums(), b.sums()
    rows = [[A[i][j] + B[i][j] for j in range(a.shape[1])] for i in range(a.shape[0])]
    return det_of_sums(rows).to_ratfun(tol_cancel)


@dataclass(frozen=True)
class ReturnDifferences:
    det_sz: RatFun        # det(Z_g + Z_c)
    det_sy: RatFun        # det(Y_g + Y_c)
    det_rr_prime: RatFun  # det(I + Z_c Y_g)
    rhp_poles: dict = field(default_factory=dict)


def det_return_differences(zg: RatMatrix, zc: RatMatrix, yg: RatMatrix, yc: RatMatrix,
                           tol_cancel: float = TOL_CANCEL) -> ReturnDifferences:
    """The return differences sharing zeros with ``det(I + Z_g Y_c)``.

    Their poles differ: e.g. ``det(Z_g + Z_c)`` inherits the zeros of
    ``det Y_c`` as poles, which can lie in the right half plane even when
    both subsystems are stable.
    """
    for a, b in ((zg, yg), (zc, yc)):
        _check_pair(a, b)
    sz = det_sum(zg, zc, tol_cancel)
    sy = det_sum(yg, yc, tol_cancel)
    rr = det_return_ratio(zc, yg, tol_cancel)
    census = {name: split_rhp(f.poles)[0] for name, f in
              (("det_sz", sz), ("det_sy", sy), ("det_rr_prime", rr))}
    return ReturnDifferences(sz, sy, rr, census)


def return_differences_from(zg: RatMatrix, yc: RatMatrix, tol_cancel: float = TOL_CANCEL):
    """Convenience wrapper inverting ``Z_g`` and ``Y_c`` first."""
    zc = yc.inv(tol_cancel)
    yg = zg.inv(tol_cancel)
    return det_return_differences(zg, zc, yg, yc, tol_cancel)
