"""Polynomials and rational functions kept in factored (gain + roots) form.

Coefficient form is only produced on demand.  Sums of factored terms are
rooted once through a balanced companion matrix and then polished with
Aberth iterations that evaluate the *factored* terms, which keeps roots of
sums accurate even when the expanded coefficients span many decades.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from . import _kernels as K
from .errors import DivideByZeroFunction, EmptyPolynomial, PoleHit

TOL_CANCEL = 1e-6   # zero/pole cancellation, relative
TOL_MERGE = 1e-9    # identifying shared denominator roots when forming LCMs
_TRIM = 1e-10       # leading-coefficient cancellation threshold in sums


def _as_roots(roots) -> np.ndarray:
    return np.array(roots, dtype=np.complex128).ravel()


def symmetrize_conjugates(roots) -> np.ndarray:
    """Force exact conjugate pairing on a root set of a real polynomial.

    Roots in the upper half plane are matched to the conjugates of roots in
    the lower half plane and each pair is replaced by its average.  Unpaired
    leftovers are projected onto the real axis.
    """
    r = _as_roots(roots)
    if r.size == 0:
        return r
    scale = np.maximum(1.0, np.abs(r))
    near_real = np.abs(r.imag) <= 1e-13 * scale
    real = r[near_real].real
    up = r[(~near_real) & (r.imag > 0)]
    lo = r[(~near_real) & (r.imag < 0)]
    ia, ib = K.greedy_match(up, np.conj(lo), np.inf)
    pairs = 0.5 * (up[ia] + np.conj(lo[ib]))
    left = np.concatenate([np.delete(up, ia), np.delete(lo, ib)]).real
    out = np.concatenate([real.astype(np.complex128), left.astype(np.complex128),
                          pairs, np.conj(pairs)])
    return out


def roots_of(coeffs) -> np.ndarray:
    """Roots of a polynomial given by ascending-degree coefficients.

    Companion-matrix eigenvalues of the monic, balanced polynomial.  Exact
    zero low-order coefficients produce exact roots at the origin.
    """
    c = np.asarray(coeffs)
    c = c.astype(np.complex128 if np.iscomplexobj(c) else np.float64).ravel()
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise EmptyPolynomial("all coefficients are zero")
    c = c[: nz[-1] + 1]
    k0 = int(nz[0])
    origin = np.zeros(k0, dtype=np.complex128)
    c = c[k0:]
    deg = c.size - 1
    if deg == 0:
        return origin
    monic = c[:-1] / c[-1]
    comp = np.zeros((deg, deg), dtype=monic.dtype)
    if deg > 1:
        comp[1:, :-1] = np.eye(deg - 1)
    comp[:, -1] = -monic
    bal, _ = scipy.linalg.matrix_balance(comp, permute=True, separate=False)
    r = scipy.linalg.eigvals(bal)
    if not np.iscomplexobj(c):
        r = symmetrize_conjugates(r)
    return np.concatenate([origin, r.astype(np.complex128)])


class FactoredPoly:
    """``gain * prod(s - r)`` over a multiset of complex roots."""

    __slots__ = ("gain", "roots", "real_coeffs")

    def __init__(self, gain, roots=(), real_coeffs=True):
        r = _as_roots(roots)
        if real_coeffs:
            r = symmetrize_conjugates(r)
            gain = complex(gain).real
        else:
            gain = complex(gain)
            if gain.imag == 0.0:
                gain = gain.real
        if gain == 0:
            r = r[:0]
        r = np.sort(r)
        r.flags.writeable = False
        self.gain = gain
        self.roots = r
        self.real_coeffs = bool(real_coeffs)

    @classmethod
    def zero(cls):
        return cls(0.0)

    @classmethod
    def const(cls, c):
        c = complex(c)
        return cls(c, (), real_coeffs=(c.imag == 0.0))

    @classmethod
    def from_coeffs(cls, coeffs):
        """Build from ascending coefficients (trailing zeros are trimmed)."""
        c = np.asarray(coeffs)
        nz = np.flatnonzero(c)
        if nz.size == 0:
            return cls.zero()
        real = not (np.iscomplexobj(c) and np.any(c.imag != 0))
        c = c.real if real else c
        return cls(c[nz[-1]], roots_of(c), real_coeffs=real)

    @property
    def degree(self) -> int:
        return -1 if self.is_zero else int(self.roots.size)

    @property
    def is_zero(self) -> bool:
        return self.gain == 0

    def coeffs(self) -> np.ndarray:
        """Ascending coefficients."""
        if self.is_zero:
            return np.zeros(1)
        c = self.gain * np.poly(self.roots)[::-1] if self.roots.size else \
            np.array([self.gain], dtype=complex)
        c = np.atleast_1d(c)
        return c.real.copy() if self.real_coeffs else c.astype(complex)

    def __call__(self, s):
        s = np.asarray(s, dtype=np.complex128)
        return K.eval_factored(s, self.gain, self.roots, np.empty(0, np.complex128))

    def __mul__(self, other):
        if not isinstance(other, FactoredPoly):
            other = FactoredPoly.const(other)
        return FactoredPoly(self.gain * other.gain,
                            np.concatenate([self.roots, other.roots]),
                            self.real_coeffs and other.real_coeffs)

    __rmul__ = __mul__

    def monic(self):
        return FactoredPoly(1.0, self.roots, self.real_coeffs)

    def __repr__(self):
        return f"FactoredPoly(gain={self.gain!r}, roots={np.array2string(self.roots, precision=6)})"


def multiset_difference(a, b, tol=TOL_CANCEL):
    """Remove the elements of ``b`` from ``a`` (matched within ``tol``).

    Returns ``(remaining, unmatched_b)``.
    """
    a = _as_roots(a)
    b = _as_roots(b)
    ia, ib = K.greedy_match(a, b, tol)
    return np.delete(a, ia), np.delete(b, ib)


def multiset_intersection(a, b, tol=TOL_CANCEL):
    a = _as_roots(a)
    ia, _ = K.greedy_match(a, _as_roots(b), tol)
    return a[np.sort(ia)]


class PolySum:
    """A sum of factored products ``sum_k g_k prod_j (s - r_kj)``.

    Used as an exact intermediate: products only concatenate roots, so the
    expression is rooted once, at the end, by :meth:`factor`.
    """

    __slots__ = ("terms", "real_coeffs")

    def __init__(self, terms=(), real_coeffs=True):
        self.terms = [(complex(g), _as_roots(r)) for g, r in terms if g != 0]
        self.real_coeffs = bool(real_coeffs)

    @classmethod
    def of(cls, p):
        if isinstance(p, PolySum):
            return p
        if isinstance(p, FactoredPoly):
            return cls([(p.gain, p.roots)], p.real_coeffs)
        c = complex(p)
        return cls([(c, ())], c.imag == 0.0)

    def __add__(self, other):
        other = PolySum.of(other)
        return PolySum(self.terms + other.terms, self.real_coeffs and other.real_coeffs)

    __radd__ = __add__

    def __neg__(self):
        return PolySum([(-g, r) for g, r in self.terms], self.real_coeffs)

    def __sub__(self, other):
        return self + (-PolySum.of(other))

    def __rsub__(self, other):
        return PolySum.of(other) - self

    def __mul__(self, other):
        other = PolySum.of(other)
        terms = [(g1 * g2, np.concatenate([r1, r2]))
                 for g1, r1 in self.terms for g2, r2 in other.terms]
        return PolySum(terms, self.real_coeffs and other.real_coeffs)

    __rmul__ = __mul__

    @property
    def is_zero(self):
        return not self.terms

    def __call__(self, s):
        s = np.asarray(s, dtype=np.complex128)
        out = np.zeros(s.shape, dtype=np.complex128)
        empty = np.empty(0, np.complex128)
        for g, r in self.terms:
            out += K.eval_factored(s, g, r, empty)
        return out

    def _packed(self):
        gains = np.array([g for g, _ in self.terms], dtype=np.complex128)
        sizes = [r.size for _, r in self.terms]
        offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum(sizes)
        flat = (np.concatenate([r for _, r in self.terms]) if self.terms
                else np.empty(0, np.complex128)).astype(np.complex128)
        return gains, flat, offsets

    def factor(self) -> FactoredPoly:
        """Root the sum and return it in factored form."""
        if self.is_zero:
            return FactoredPoly.zero()
        if len(self.terms) == 1:
            g, r = self.terms[0]
            return FactoredPoly(g, r, self.real_coeffs)
        allr = np.concatenate([r for _, r in self.terms])
        mags = np.abs(allr[allr != 0])
        sigma = float(np.exp(np.mean(np.log(mags)))) if mags.size else 1.0
        dmax = max(r.size for _, r in self.terms)
        coef = np.zeros(dmax + 1, dtype=np.complex128)
        absacc = np.zeros(dmax + 1)
        for g, r in self.terms:
            d = r.size
            p = np.atleast_1d(np.poly(r / sigma))[::-1] * (g * sigma ** (d - dmax))
            coef[: d + 1] += p
            absacc[: d + 1] += np.abs(p)
        n = dmax
        while n >= 0 and abs(coef[n]) <= _TRIM * absacc[n]:
            n -= 1
        if n < 0:
            return FactoredPoly.zero()
        c = coef[: n + 1]
        if self.real_coeffs:
            c = c.real
        z0 = roots_of(c) * sigma
        gains, flat, offsets = self._packed()
        z = z0
        if z0.size:
            z1 = K.aberth(z0, gains, flat, offsets)
            if np.all(np.isfinite(z1)):
                z = z1
        if self.real_coeffs:
            z = symmetrize_conjugates(z)
        gain = self._gain_at_probe(z, sigma, gains, flat, offsets)
        return FactoredPoly(gain, z, self.real_coeffs)

    @staticmethod
    def _gain_at_probe(z, sigma, gains, flat, offsets):
        best, best_d = None, -1.0
        for theta in (0.7, 1.9, 2.8, 0.3, 2.4):
            s0 = 1.37 * sigma * np.exp(1j * theta)
            d = np.min(np.abs(s0 - np.concatenate([z, flat]))) if (z.size + flat.size) else 1.0
            if d > best_d:
                best, best_d = s0, d
        s0 = best
        lz = np.sum(np.log(s0 - z)) if z.size else 0.0
        total = 0j
        for k in range(gains.size):
            r = flat[offsets[k]:offsets[k + 1]]
            lt = np.sum(np.log(s0 - r)) if r.size else 0.0
            total += gains[k] * np.exp(lt - lz)
        return total


class RatFun:
    """Ratio ``num / den`` of factored polynomials; ``den`` is kept monic."""

    __slots__ = ("num", "den")

    def __init__(self, num: FactoredPoly, den: FactoredPoly | None = None):
        if den is None:
            den = FactoredPoly(1.0)
        if den.is_zero:
            raise DivideByZeroFunction("denominator is identically zero")
        real = num.real_coeffs and den.real_coeffs
        if den.gain != 1.0 or num.real_coeffs != real:
            num = FactoredPoly(num.gain / den.gain, num.roots, real)
            den = FactoredPoly(1.0, den.roots, real)
        self.num = num
        self.den = den

    @classmethod
    def const(cls, c):
        return cls(FactoredPoly.const(c))

    @classmethod
    def from_roots(cls, zeros=(), poles=(), gain=1.0, real_coeffs=True):
        return cls(FactoredPoly(gain, zeros, real_coeffs),
                   FactoredPoly(1.0, poles, real_coeffs))

    @classmethod
    def from_coeffs(cls, num, den):
        """Build from ascending coefficient sequences."""
        return cls(FactoredPoly.from_coeffs(num), FactoredPoly.from_coeffs(den))

    @property
    def zeros(self):
        return self.num.roots

    @property
    def poles(self):
        return self.den.roots

    @property
    def gain(self):
        return self.num.gain

    @property
    def is_zero(self):
        return self.num.is_zero

    @property
    def real_coeffs(self):
        return self.num.real_coeffs

    @property
    def rel_degree(self) -> int:
        """Denominator degree minus numerator degree."""
        return self.den.degree - self.num.degree

    def __call__(self, s):
        return rf_eval(self, s)

    def __add__(self, other):
        return rf_add(self, _lift(other))

    __radd__ = __add__

    def __neg__(self):
        return RatFun(FactoredPoly(-self.num.gain, self.num.roots, self.num.real_coeffs), self.den)

    def __sub__(self, other):
        return rf_add(self, -_lift(other))

    def __rsub__(self, other):
        return rf_add(_lift(other), -self)

    def __mul__(self, other):
        return rf_mul(self, _lift(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return rf_mul(self, rf_inv(_lift(other)))

    def __rtruediv__(self, other):
        return rf_mul(_lift(other), rf_inv(self))

    def __repr__(self):
        return (f"RatFun(gain={self.gain!r}, zeros={np.array2string(self.zeros, precision=6)}, "
                f"poles={np.array2string(self.poles, precision=6)})")


def _lift(x) -> RatFun:
    if isinstance(x, RatFun):
        return x
    if isinstance(x, FactoredPoly):
        return RatFun(x)
    return RatFun.const(x)


def cancel(rf: RatFun, tol_cancel: float = TOL_CANCEL) -> RatFun:
    """Remove zero/pole pairs closer than ``tol_cancel * max(1, |z|, |p|)``."""
    if tol_cancel <= 0:
        raise ValueError("tol_cancel must be positive")
    if rf.is_zero:
        return RatFun(FactoredPoly.zero())
    iz, ip = K.greedy_match(rf.num.roots, rf.den.roots, tol_cancel)
    if iz.size == 0:
        return rf
    real = rf.real_coeffs
    return RatFun(FactoredPoly(rf.num.gain, np.delete(rf.num.roots, iz), real),
                  FactoredPoly(1.0, np.delete(rf.den.roots, ip), real))


def rf_eval(rf: RatFun, s):
    s_arr = np.asarray(s, dtype=np.complex128)
    if rf.poles.size:
        flat = s_arr.ravel()
        near = np.abs(flat[:, None] - rf.poles[None, :])
        if np.any(near <= 1e-300 * np.maximum(1.0, np.abs(flat))[:, None]):
            raise PoleHit("evaluation point coincides with a pole")
    out = K.eval_factored(s_arr, rf.num.gain, rf.num.roots, rf.den.roots)
    return out if np.ndim(s) else complex(out)


def rf_add(a: RatFun, b: RatFun, tol_cancel: float = TOL_CANCEL) -> RatFun:
    if a.is_zero:
        return cancel(b, tol_cancel)
    if b.is_zero:
        return cancel(a, tol_cancel)
    ia, ib = K.greedy_match(a.den.roots, b.den.roots, TOL_MERGE)
    extra_b = np.delete(b.den.roots, ib)
    extra_a = np.delete(a.den.roots, ia)
    lcm = np.concatenate([a.den.roots, extra_b])
    real = a.real_coeffs and b.real_coeffs
    num = PolySum([(a.num.gain, np.concatenate([a.num.roots, extra_b])),
                   (b.num.gain, np.concatenate([b.num.roots, extra_a]))], real).factor()
    return cancel(RatFun(num, FactoredPoly(1.0, lcm, real)), tol_cancel)


def rf_mul(a: RatFun, b: RatFun, tol_cancel: float = TOL_CANCEL) -> RatFun:
    real = a.real_coeffs and b.real_coeffs
    if a.is_zero or b.is_zero:
        return RatFun(FactoredPoly.zero())
    num = FactoredPoly(a.num.gain * b.num.gain, np.concatenate([a.zeros, b.zeros]), real)
    den = FactoredPoly(1.0, np.concatenate([a.poles, b.poles]), real)
    return cancel(RatFun(num, den), tol_cancel)


def rf_inv(a: RatFun, tol_cancel: float = TOL_CANCEL) -> RatFun:
    if a.is_zero:
        raise DivideByZeroFunction("inverse of the zero function")
    real = a.real_coeffs
    return cancel(RatFun(FactoredPoly(1.0 / a.num.gain, a.poles, real),
                         FactoredPoly(1.0, a.zeros, real)), tol_cancel)


def rf_sub(a, b, tol_cancel=TOL_CANCEL):
    return rf_add(a, -b, tol_cancel)


def rhp_count(roots, margin=0.0) -> int:
    """Number of roots with real part strictly greater than ``margin``."""
    roots = _as_roots(roots)
    return int(np.count_nonzero(roots.real > margin))


def split_rhp(roots, rel_band=1e-9):
    """Split roots into (rhp, marginal) using a relative band around Re = 0."""
    roots = _as_roots(roots)
    band = rel_band * np.abs(roots)
    marginal = np.abs(roots.real) <= band
    return roots[(roots.real > 0) & ~marginal], roots[marginal]


def lcm_roots(multisets, tol=TOL_MERGE) -> np.ndarray:
    """Least common multiple of root multisets (max multiplicity per root)."""
    out = np.empty(0, np.complex128)
    for r in multisets:
        extra, _ = multiset_difference(r, out, tol)
        out = np.concatenate([out, extra])
    return out


class RatSum:
    """A sum of rational products ``sum_k g_k prod(s - z_kj) / prod(s - p_kj)``.

    Terms are only concatenated under ``+`` and ``*``; :meth:`to_ratfun`
    brings everything over one least common denominator and roots the
    numerator once.
    """

    __slots__ = ("terms", "real_coeffs")

    def __init__(self, terms=(), real_coeffs=True):
        self.terms = [(complex(g), _as_roots(z), _as_roots(p)) for g, z, p in terms if g != 0]
        self.real_coeffs = bool(real_coeffs)

    @classmethod
    def of(cls, x):
        if isinstance(x, RatSum):
            return x
        x = _lift(x)
        return cls([(x.gain, x.zeros, x.poles)], x.real_coeffs)

    def __add__(self, other):
        other = RatSum.of(other)
        return RatSum(self.terms + other.terms, self.real_coeffs and other.real_coeffs)

    __radd__ = __add__

    def __neg__(self):
        return RatSum([(-g, z, p) for g, z, p in self.terms], self.real_coeffs)

    def __sub__(self, other):
        return self + (-RatSum.of(other))

    def __rsub__(self, other):
        return RatSum.of(other) - self

    def __mul__(self, other):
        other = RatSum.of(other)
        terms = [(g1 * g2, np.concatenate([z1, z2]), np.concatenate([p1, p2]))
                 for g1, z1, p1 in self.terms for g2, z2, p2 in other.terms]
        return RatSum(terms, self.real_coeffs and other.real_coeffs)

    __rmul__ = __mul__

    def __call__(self, s):
        s = np.asarray(s, dtype=np.complex128)
        out = np.zeros(s.shape, dtype=np.complex128)
        for g, z, p in self.terms:
            out += K.eval_factored(s, g, z, p)
        return out

    def to_ratfun(self, tol_cancel: float = TOL_CANCEL) -> RatFun:
        if not self.terms:
            return RatFun(FactoredPoly.zero())
        real = self.real_coeffs
        # cancel inside each term first so the common denominator stays small
        terms = []
        for g, z, p in self.terms:
            iz, ip = K.greedy_match(z, p, TOL_MERGE)
            terms.append((g, np.delete(z, iz), np.delete(p, ip)))
        lcm = lcm_roots([p for _, _, p in terms])
        ps = PolySum([(g, np.concatenate([z, multiset_difference(lcm, p, TOL_MERGE)[0]]))
                      for g, z, p in terms], real)
        return cancel(RatFun(ps.factor(), FactoredPoly(1.0, lcm, real)), tol_cancel)
