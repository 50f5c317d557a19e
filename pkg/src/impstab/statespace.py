"""State-space models, transfer-matrix extraction and the closed-loop oracle.

Sign convention used throughout the package: the grid subsystem is an
impedance (current into the grid -> terminal voltage), the converter is an
admittance (terminal voltage -> current into the converter).  The grid
current is therefore minus the converter current and the characteristic
equation of the interconnection is ``det(I + Z_g Y_c) = 0``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels as K
from .errors import (AlgebraicLoop, DimensionMismatch, NonSquare,
                     SingularMatrixFunction)
from .ratfun import (TOL_CANCEL, FactoredPoly, RatFun, RatSum, cancel,
                     lcm_roots, rf_inv)

STABILITY_MARGIN = 1e-9  # relative to ||A||
_ZERO_COEFF = 1e-10      # Leverrier coefficient treated as structurally zero


def _frozen(x, shape=None):
    a = np.array(x, dtype=np.float64, copy=True)
    if shape is not None and a.size == 0:
        a = a.reshape(shape)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class StateSpace:
    """``x' = A x + B u``,  ``y = C x + D u + E u'``.

    ``E`` is an optional derivative feedthrough so that improper impedances
    such as a series inductance can be represented without a fake state.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray | None = None
    input_labels: tuple = field(default=())
    output_labels: tuple = field(default=())

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        D = np.atleast_2d(np.asarray(self.D, dtype=np.float64))
        p, m = D.shape
        n = A.shape[0] if A.size else 0
        if A.size and A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        B = np.asarray(self.B, dtype=np.float64).reshape(n, m) if n == 0 else \
            np.atleast_2d(np.asarray(self.B, dtype=np.float64))
        C = np.asarray(self.C, dtype=np.float64).reshape(p, n) if n == 0 else \
            np.atleast_2d(np.asarray(self.C, dtype=np.float64))
        if B.shape != (n, m):
            raise DimensionMismatch(f"B has shape {B.shape}, expected {(n, m)}")
        if C.shape != (p, n):
            raise DimensionMismatch(f"C has shape {C.shape}, expected {(p, n)}")
        E = self.E
        if E is not None:
            E = np.atleast_2d(np.asarray(E, dtype=np.float64))
            if E.shape != (p, m):
                raise DimensionMismatch(f"E has shape {E.shape}, expected {(p, m)}")
            if not np.any(E):
                E = None
        for lab, size, what in ((self.input_labels, m, "input"),
                                (self.output_labels, p, "output")):
            if lab and len(lab) != size:
                raise DimensionMismatch(f"{len(lab)} {what} labels for {size} channels")
        object.__setattr__(self, "A", _frozen(A.reshape(n, n)))
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "C", _frozen(C))
        object.__setattr__(self, "D", _frozen(D))
        object.__setattr__(self, "E", None if E is None else _frozen(E))
        object.__setattr__(self, "input_labels", tuple(self.input_labels))
        object.__setattr__(self, "output_labels", tuple(self.output_labels))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def is_proper(self):
        return self.E is None

    def poles(self):
        return eigenvalues(self.A)

    def stability_class(self, margin: float = STABILITY_MARGIN) -> str:
        """``"stable"``, ``"marginal"`` or ``"unstable"``."""
        if self.n == 0:
            return "stable"
        lam = self.poles()
        scale = max(np.linalg.norm(self.A, 2), 1e-300)
        worst = lam.real.max()
        if worst < -margin * scale:
            return "stable"
        if worst <= margin * scale:
            return "marginal"
        return "unstable"

    def open_loop_stable(self, margin: float = STABILITY_MARGIN) -> bool:
        return self.stability_class(margin) == "stable"

    def frequency_response(self, s) -> np.ndarray:
        """Evaluate ``C (sI - A)^-1 B + D + s E``; shape ``s.shape + (p, m)``."""
        s = np.asarray(s, dtype=np.complex128)
        flat = s.ravel()
        out = np.broadcast_to(self.D, (flat.size, self.p, self.m)).astype(np.complex128)
        if self.n:
            M = flat[:, None, None] * np.eye(self.n) - self.A
            X = np.linalg.solve(M, np.broadcast_to(self.B, (flat.size, self.n, self.m)))
            out = out + self.C @ X
        if self.E is not None:
            out = out + flat[:, None, None] * self.E
        return out.reshape(s.shape + (self.p, self.m))

    def __call__(self, s):
        return self.frequency_response(s)


def eigenvalues(M) -> np.ndarray:
    """Eigenvalues of a square real matrix, sorted for reproducibility."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {M.shape}")
    if M.size == 0:
        return np.empty(0, np.complex128)
    return np.sort(scipy.linalg.eigvals(M).astype(np.complex128))


# ---------------------------------------------------------------------------
# rational matrices
# ---------------------------------------------------------------------------

def _perm_sign(perm):
    sign = 1
    seen = list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def det_of_sums(rows) -> RatSum:
    """Determinant of a square grid of :class:`RatSum` by permutation expansion."""
    n = len(rows)
    total = RatSum()
    for perm in itertools.permutations(range(n)):
        term = RatSum.of(float(_perm_sign(perm)))
        for i, j in enumerate(perm):
            term = term * rows[i][j]
        total = total + term
    return total


class RatMatrix:
    """A ``p x m`` grid of :class:`RatFun` entries."""

    __slots__ = ("entries", "_common_den")

    def __init__(self, entries):
        rows = tuple(tuple(e if isinstance(e, RatFun) else RatFun.const(e) for e in row)
                     for row in entries)
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise DimensionMismatch("ragged or empty entry grid")
        self.entries = rows
        self._common_den = None

    @classmethod
    def constant(cls, M):
        M = np.atleast_2d(np.asarray(M))
        return cls([[RatFun.const(x) for x in row] for row in M])

    @classmethod
    def identity(cls, n):
        return cls.constant(np.eye(n))

    @classmethod
    def diag(cls, items):
        items = list(items)
        n = len(items)
        return cls([[items[i] if i == j else RatFun.const(0.0) for j in range(n)]
                    for i in range(n)])

    @property
    def shape(self):
        return len(self.entries), len(self.entries[0])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    @property
    def common_den(self) -> FactoredPoly:
        """Least common multiple of the entry denominators."""
        if self._common_den is None:
            roots = lcm_roots([e.poles for row in self.entries for e in row])
            self._common_den = FactoredPoly(1.0, roots, self.real_coeffs)
        return self._common_den

    @property
    def real_coeffs(self):
        return all(e.real_coeffs for row in self.entries for e in row)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=np.complex128)
        p, m = self.shape
        out = np.empty(s.shape + (p, m), dtype=np.complex128)
        for i in range(p):
            for j in range(m):
                out[..., i, j] = self.entries[i][j](s) if s.ndim else self.entries[i][j](complex(s))
        return out

    def sums(self):
        """Entries as unrooted :class:`RatSum` values."""
        return [[RatSum.of(e) for e in row] for row in self.entries]

    def map(self, fn):
        return RatMatrix([[fn(e) for e in row] for row in self.entries])

    def __add__(self, other):
        other = _lift_matrix(other, self.shape)
        if other.shape != self.shape:
            raise DimensionMismatch(f"cannot add {self.shape} and {other.shape}")
        return RatMatrix([[a + b for a, b in zip(ra, rb)]
                          for ra, rb in zip(self.entries, other.entries)])

    __radd__ = __add__

    def __neg__(self):
        return self.map(lambda e: -e)

    def __sub__(self, other):
        return self + (-_lift_matrix(other, self.shape))

    def __matmul__(self, other):
        if self.shape[1] != other.shape[0]:
            raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
        return RatMatrix(sum_product_grid(self.sums(), other.sums()))

    def transpose(self):
        return RatMatrix(list(zip(*self.entries)))

    def det(self, tol_cancel: float = TOL_CANCEL) -> RatFun:
        p, m = self.shape
        if p != m:
            raise NonSquare(f"determinant of a {p}x{m} matrix")
        return det_of_sums(self.sums()).to_ratfun(tol_cancel)

    def inv(self, tol_cancel: float = TOL_CANCEL) -> "RatMatrix":
        """Inverse via adjugate over determinant."""
        p, m = self.shape
        if p != m:
            raise NonSquare(f"inverse of a {p}x{m} matrix")
        d = self.det(tol_cancel)
        if d.is_zero:
            raise SingularMatrixFunction("determinant is identically zero")
        dinv = rf_inv(d)
        if p == 1:
            return RatMatrix([[dinv]])
        S = self.sums()
        out = [[None] * p for _ in range(p)]
        for i in range(p):
            for j in range(p):
                minor = [[S[r][c] for c in range(p) if c != i] for r in range(p) if r != j]
                cof = det_of_sums(minor) * float((-1) ** (i + j))
                out[i][j] = (cof * RatSum.of(dinv)).to_ratfun(tol_cancel)
        return RatMatrix(out)

    def __repr__(self):
        return f"RatMatrix(shape={self.shape})"


def sum_product_grid(A, B):
    """Rooted entries of the product of two grids of :class:`RatSum`."""
    p, k, m = len(A), len(B), len(B[0])
    out = []
    for i in range(p):
        row = []
        for j in range(m):
            acc = RatSum()
            for t in range(k):
                acc = acc + A[i][t] * B[t][j]
            row.append(acc.to_ratfun())
        out.append(row)
    return out


def _lift_matrix(x, shape):
    if isinstance(x, RatMatrix):
        return x
    x = np.asarray(x)
    if x.ndim == 0:
        return RatMatrix.constant(np.full(shape, x))
    return RatMatrix.constant(x)


def invert_2x2(m: RatMatrix, tol_cancel: float = TOL_CANCEL) -> RatMatrix:
    """Inverse of a 2x2 rational matrix; each entry is cancelled."""
    if m.shape != (2, 2):
        raise DimensionMismatch(f"expected 2x2, got {m.shape}")
    return m.inv(tol_cancel)


# ---------------------------------------------------------------------------
# state space -> transfer matrix
# ---------------------------------------------------------------------------

def _probe(roots, scale):
    """A point well separated from every root, at roughly the given scale."""
    best, best_d = None, -1.0
    for theta in (0.77, 1.93, 2.61, 0.31, 2.29):
        s0 = 1.41 * scale * np.exp(1j * theta)
        d = np.min(np.abs(s0 - roots)) / scale if roots.size else 1.0
        if d > best_d:
            best, best_d = s0, d
    return best


def _gain_from_value(value, s0, zeros, poles):
    lz = np.sum(np.log(s0 - zeros)) if zeros.size else 0.0
    lp = np.sum(np.log(s0 - poles)) if poles.size else 0.0
    return value * np.exp(lp - lz)


def _numerator_degree(ss_bal, i, j, lev_M, sigma):
    """Degree of the numerator of entry (i, j) over det(sI - A)."""
    n = ss_bal.n
    if ss_bal.E is not None and ss_bal.E[i, j] != 0:
        return n + 1
    if ss_bal.D[i, j] != 0:
        return n
    c = ss_bal.C[i]
    b = ss_bal.B[:, j]
    ref = np.linalg.norm(c) * np.linalg.norm(b)
    if ref == 0:
        return -1
    for k in range(n):
        coeff = c @ lev_M[k] @ b
        if abs(coeff) > _ZERO_COEFF * ref * max(1.0, np.linalg.norm(lev_M[k], 2)):
            return n - 1 - k
    return -1


def _pencil_zeros(A, b, c, d, e, count):
    """Finite zeros of one channel from its Rosenbrock pencil."""
    if count <= 0:
        return np.empty(0, np.complex128)
    n = A.shape[0]
    Ap = np.zeros((n + 1, n + 1))
    Ap[:n, :n] = A
    Ap[:n, n] = b
    Ap[n, :n] = -c
    Ap[n, n] = -d
    Ep = np.zeros((n + 1, n + 1))
    Ep[:n, :n] = np.eye(n)
    Ep[n, n] = e
    w = scipy.linalg.eigvals(Ap, Ep, homogeneous_eigvals=True)
    alpha, beta = w[0], w[1]
    finiteness = np.abs(beta) / np.maximum(np.hypot(np.abs(alpha), np.abs(beta)), 1e-300)
    order = np.argsort(-finiteness, kind="stable")[:count]
    return (alpha[order] / beta[order]).astype(np.complex128)


def transfer_matrix(ss: StateSpace, tol_cancel: float = TOL_CANCEL) -> RatMatrix:
    """Exact-structure transfer matrix of a state-space model.

    Every entry starts over the characteristic polynomial of ``A`` (its
    eigenvalues) and is then cancelled.  The numerator degree comes from the
    Leverrier-Faddeev adjugate coefficients, the numerator roots from the
    channel's Rosenbrock pencil and the gain from one direct evaluation.
    """
    n, p, m = ss.n, ss.p, ss.m
    E = ss.E if ss.E is not None else np.zeros((p, m))
    if n == 0:
        rows = []
        for i in range(p):
            row = []
            for j in range(m):
                d, e = ss.D[i, j], E[i, j]
                if e != 0:
                    row.append(RatFun(FactoredPoly(e, [-d / e])))
                else:
                    row.append(RatFun.const(d))
            rows.append(row)
        return RatMatrix(rows)

    # diagonal state scaling improves the conditioning of both the adjugate
    # recursion and the pencil eigenproblems
    _, (scl, _perm) = scipy.linalg.matrix_balance(ss.A, permute=False, separate=True)
    A = (ss.A * scl[None, :]) / scl[:, None]
    B = ss.B / scl[:, None]
    C = ss.C * scl[None, :]
    bal = StateSpace(A, B, C, ss.D, ss.E)
    sigma = max(np.linalg.norm(A, 2), 1e-300)
    _, lev_M = K.leverrier(A / sigma)

    poles = eigenvalues(ss.A)
    pmag = np.abs(poles[poles != 0])
    scale = float(np.exp(np.mean(np.log(pmag)))) if pmag.size else 1.0

    rows = []
    for i in range(p):
        row = []
        for j in range(m):
            deg = _numerator_degree(bal, i, j, lev_M, sigma)
            if deg < 0:
                row.append(RatFun(FactoredPoly.zero()))
                continue
            zeros = _pencil_zeros(A, B[:, j], C[i], ss.D[i, j], E[i, j], deg)
            s0 = _probe(np.concatenate([zeros, poles]), scale)
            val = ss.frequency_response(np.array([s0]))[0, i, j]
            gain = _gain_from_value(val, s0, zeros, poles).real
            rf = RatFun(FactoredPoly(gain, zeros), FactoredPoly(1.0, poles))
            row.append(cancel(rf, tol_cancel))
        rows.append(row)
    return RatMatrix(rows)


# ---------------------------------------------------------------------------
# interconnections
# ---------------------------------------------------------------------------

def close_loop(zg_ss: StateSpace, yc_ss: StateSpace, cond_limit: float = 1e12) -> StateSpace:
    """Autonomous interconnection of a grid impedance and a converter admittance.

    The returned model has no inputs or outputs; its ``A`` matrix carries
    the closed-loop modes.  A grid with derivative feedthrough (series
    inductance) requires a strictly proper converter admittance.
    """
    if zg_ss.m != yc_ss.p or zg_ss.p != yc_ss.m:
        raise DimensionMismatch(
            f"grid is {zg_ss.p}x{zg_ss.m}, converter is {yc_ss.p}x{yc_ss.m}")
    k = zg_ss.p
    Ag, Bg, Cg, Dg = zg_ss.A, zg_ss.B, zg_ss.C, zg_ss.D
    Ac, Bc, Cc, Dc = yc_ss.A, yc_ss.B, yc_ss.C, yc_ss.D
    ng, nc = zg_ss.n, yc_ss.n
    if zg_ss.E is None:
        W = np.eye(k) + Dg @ Dc
        # v = W^-1 (Cg xg - Dg Cc xc)
        Vx = np.hstack([Cg, -Dg @ Cc])
    else:
        if np.any(Dc):
            raise AlgebraicLoop("improper grid impedance needs a strictly proper converter")
        Eg = zg_ss.E
        W = np.eye(k) + Eg @ Cc @ Bc
        Vx = np.hstack([Cg, -(Dg @ Cc + Eg @ Cc @ Ac)])
    if np.linalg.cond(W) > cond_limit:
        raise AlgebraicLoop("direct-feedthrough loop is singular")
    V = np.linalg.solve(W, Vx)          # v = V x
    Ig = -(np.hstack([np.zeros((k, ng)), Cc]) + Dc @ V)   # current into the grid
    A = np.zeros((ng + nc, ng + nc))
    A[:ng, :] = Bg @ Ig
    A[:ng, :ng] += Ag
    A[ng:, :] = Bc @ V
    A[ng:, ng:] += Ac
    return StateSpace(A, np.zeros((ng + nc, 0)), np.zeros((0, ng + nc)), np.zeros((0, 0)))


def static_interconnect(blocks, K_mat, cond_limit: float = 1e12) -> StateSpace:
    """Close the loop ``u = K y`` over a block-diagonal stack of proper models."""
    blocks = list(blocks)
    if any(not b.is_proper for b in blocks):
        raise AlgebraicLoop("static interconnection requires proper blocks")
    A = scipy.linalg.block_diag(*[b.A for b in blocks])
    B = scipy.linalg.block_diag(*[b.B for b in blocks])
    C = scipy.linalg.block_diag(*[b.C for b in blocks])
    D = scipy.linalg.block_diag(*[b.D for b in blocks])
    n = A.shape[0] if A.size else 0
    A = A.reshape(n, n)
    B = B.reshape(n, D.shape[1])
    C = C.reshape(D.shape[0], n)
    K_mat = np.asarray(K_mat, dtype=np.float64)
    if K_mat.shape != (D.shape[1], D.shape[0]):
        raise DimensionMismatch(f"K has shape {K_mat.shape}, expected {(D.shape[1], D.shape[0])}")
    W = np.eye(D.shape[0]) - D @ K_mat
    if np.linalg.cond(W) > cond_limit:
        raise AlgebraicLoop("direct-feedthrough loop is singular")
    Acl = A + B @ K_mat @ np.linalg.solve(W, C)
    return StateSpace(Acl, np.zeros((n, 0)), np.zeros((0, n)), np.zeros((0, 0)))


def random_stable(rng, n, p=2, m=2, feedthrough=True, spread=(0.5, 200.0)) -> StateSpace:
    """Random strictly stable model with eigenvalues spread over a band.

    Eigenvalues are placed explicitly (real and complex pairs, log-spaced
    magnitudes) and mixed by a random well-conditioned similarity.
    """
    lo, hi = spread
    blocks = []
    k = 0
    while k < n:
        mag = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        if n - k >= 2 and rng.random() < 0.6:
            zeta = rng.uniform(0.05, 0.9)
            re, im = -zeta * mag, mag * np.sqrt(1 - zeta ** 2)
            blocks.append(np.array([[re, im], [-im, re]]))
            k += 2
        else:
            blocks.append(np.array([[-mag]]))
            k += 1
    J = scipy.linalg.block_diag(*blocks) if blocks else np.zeros((0, 0))
    Q, _ = np.linalg.qr(rng.normal(size=(n, n))) if n else (np.zeros((0, 0)), None)
    S = Q @ np.diag(np.exp(rng.uniform(-0.5, 0.5, size=n))) if n else Q
    A = S @ J @ np.linalg.inv(S) if n else J
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(p, n))
    D = rng.normal(size=(p, m)) * (0.3 if feedthrough else 0.0)
    return StateSpace(A, B, C, D)
