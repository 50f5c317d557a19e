"""Frequency sweeps, winding numbers and Nyquist-type stability verdicts.

Conventions
-----------
* Winding numbers are counted counter-clockwise positive.  The Nyquist
  contour runs up the imaginary axis and closes clockwise through the right
  half plane, so the clockwise count is ``N_cw = -winding`` and the argument
  principle reads ``N_cw = Z - P``.
* Loci cover the whole imaginary axis.  The contour is closed at infinity
  from the channel's asymptote ``k s^-r``: the closing arc contributes
  ``r * pi`` of phase, which is zero for biproper channels and negative for
  improper ones.
* Real-coefficient channels are evaluated for ``w >= 0`` only and mirrored
  by conjugation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import (BranchTrackingFailure, OpenLoopUnstable, OriginPass,
                     UnresolvedWinding)
from .ratfun import RatFun, split_rhp
from .statespace import RatMatrix

TWO_PI = 2.0 * np.pi
MAX_DPHASE = np.pi / 6          # refine where the phase moves more than 30 degrees
MIN_STEP_HZ = 1e-4
GUARD_REL = 1e-6                # origin guard relative to the median distance
WINDING_RESIDUE = 0.15
MAX_POINTS = 400_000
ORACLE_MARGIN = 1e-6


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INDETERMINATE = "Indeterminate"
    MARGINAL = "Marginal"


def oracle_verdict(eigs, margin: float = ORACLE_MARGIN) -> Verdict:
    """Ground truth from closed-loop eigenvalues (absolute margin on Re)."""
    eigs = np.asarray(eigs)
    if eigs.size == 0:
        return Verdict.STABLE
    worst = float(eigs.real.max())
    if worst > margin:
        return Verdict.UNSTABLE
    if worst < -margin:
        return Verdict.STABLE
    return Verdict.MARGINAL


# ---------------------------------------------------------------------------
# grids and channels
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FreqGrid:
    """Strictly increasing angular frequencies (rad/s)."""

    omega: np.ndarray
    base_step_hz: float
    symmetric: bool = False

    def __post_init__(self):
        w = np.array(self.omega, dtype=np.float64)
        if w.ndim != 1 or w.size < 2 or np.any(np.diff(w) <= 0):
            raise ValueError("grid must be strictly increasing with at least two points")
        w.flags.writeable = False
        object.__setattr__(self, "omega", w)

    @classmethod
    def linear(cls, f_min_hz, f_max_hz, step_hz):
        if not f_max_hz > f_min_hz:
            raise ValueError("f_max must exceed f_min")
        n = int(round((f_max_hz - f_min_hz) / step_hz))
        f = f_min_hz + step_hz * np.arange(n + 1)
        return cls(TWO_PI * f, float(step_hz), symmetric=np.isclose(f_min_hz, -f_max_hz))

    @classmethod
    def full(cls, band_hz=100.0, step_hz=0.5, omega_max=None, per_decade=60):
        """Symmetric grid: linear over ``|f| <= band_hz`` plus log tails to ``omega_max``."""
        w_band = TWO_PI * band_hz
        n = int(round(band_hz / step_hz))
        pos = w_band * np.arange(n + 1) / n
        if omega_max is not None and omega_max > w_band * 1.0001:
            dec = np.log10(omega_max / w_band)
            tail = np.logspace(np.log10(w_band), np.log10(omega_max),
                               max(2, int(np.ceil(dec * per_decade)) + 1))[1:]
            pos = np.concatenate([pos, tail])
        return cls(np.concatenate([-pos[:0:-1], pos]), float(step_hz), symmetric=True)

    @classmethod
    def for_roots(cls, roots, band_hz=100.0, step_hz=0.5, reach=1e3, shift=0.0):
        """Full grid reaching ``reach`` times the largest root magnitude.

        Each root adds a cluster of points around its imaginary part, dense
        on the scale of its real part, so that no interval can hide a full
        phase turn from a lightly damped root.
        """
        roots = np.asarray(roots, dtype=np.complex128)
        scale = max(float(np.max(np.abs(roots))) if roots.size else 0.0,
                    TWO_PI * band_hz, abs(shift))
        base = cls.full(band_hz, step_hz, omega_max=reach * scale)
        if not roots.size:
            return base
        spread = np.sinh(np.linspace(-6.0, 6.0, 49))
        width = np.maximum(np.abs(roots.real), 1e-9 * np.maximum(1.0, np.abs(roots)))
        centers = np.concatenate([roots.imag, -roots.imag])
        widths = np.concatenate([width, width])
        extra = (centers[:, None] + widths[:, None] * spread[None, :]).ravel()
        w = np.unique(np.concatenate([base.omega, extra, -extra]))
        w = w[np.abs(w) <= base.omega[-1]]
        return cls(w, float(step_hz), symmetric=True)

    @property
    def freq_hz(self):
        return self.omega / TWO_PI


@dataclass(frozen=True, eq=False)
class Channel:
    """A scalar frequency response ``fn(s)`` with its behaviour at infinity.

    ``rel_degree`` and ``asymptote`` describe ``fn(s) ~ asymptote * s**-rel_degree``
    for large ``|s|``; ``tail_omega`` marks where that regime starts.
    """

    fn: object
    name: str = "channel"
    rel_degree: int = 0
    asymptote: complex = 1.0
    real_coeffs: bool = True
    tail_omega: float = np.inf
    roots: np.ndarray = field(default_factory=lambda: np.empty(0, np.complex128))

    @classmethod
    def from_ratfun(cls, rf: RatFun, name="channel", shift=0.0):
        """Channel of ``rf(s - j shift)``; a nonzero shift drops real symmetry."""
        roots = np.concatenate([rf.zeros, rf.poles]) + 1j * shift
        scale = max(float(np.max(np.abs(roots))) if roots.size else 1.0, 1.0)
        if shift:
            fn = lambda s, rf=rf: K.eval_factored(np.asarray(s) - 1j * shift,
                                                 rf.num.gain, rf.zeros, rf.poles)
        else:
            fn = lambda s, rf=rf: K.eval_factored(np.asarray(s), rf.num.gain, rf.zeros, rf.poles)
        return cls(fn, name, rf.rel_degree, complex(rf.gain), rf.real_coeffs and not shift,
                   10.0 * scale, roots)

    def limit_point(self):
        if self.rel_degree > 0:
            return 0j
        if self.rel_degree == 0:
            return complex(self.asymptote)
        return None  # infinity


@dataclass(frozen=True, eq=False)
class Locus:
    omega: np.ndarray
    values: np.ndarray
    name: str = "channel"
    domain: str = "dq"
    rel_degree: int = 0
    asymptote: complex = 1.0
    closure: str = "asymptote"   # or "chord"
    tail_omega: float = np.inf
    low_confidence: bool = False

    @property
    def freq_hz(self):
        return self.omega / TWO_PI

    def guard(self, about=0j):
        return GUARD_REL * float(np.median(np.abs(self.values - about)))

    def limit_point(self):
        if self.rel_degree > 0:
            return 0j
        if self.rel_degree == 0:
            return complex(self.asymptote)
        return None


def _evaluate(fn, w):
    v = np.asarray(fn(1j * w), dtype=np.complex128).reshape(w.shape)
    bad = ~np.isfinite(v)
    if np.any(bad):
        # grid point on a pole: bump by half the local spacing
        step = np.gradient(w) if w.size > 1 else np.ones_like(w)
        w = w.copy()
        w[bad] = w[bad] + 0.5 * step[bad]
        v[bad] = np.asarray(fn(1j * w[bad]), dtype=np.complex128)
    return w, v


def _near_mask(w, tail_omega, limit, about):
    """Samples where closeness to ``about`` is expected (asymptotic tail)."""
    if limit is None or abs(limit - about) > 0:
        return np.zeros(w.shape, bool)
    return np.abs(w) > tail_omega


def sweep(channel: Channel, grid: FreqGrid, about=0j, domain="dq",
          max_points=MAX_POINTS, min_step_hz=MIN_STEP_HZ, max_dphase=MAX_DPHASE) -> Locus:
    """Sample a channel with adaptive bisection.

    Intervals are split while the phase about ``about`` moves more than
    ``max_dphase`` or the locus comes within ten guard radii of ``about``,
    down to ``min_step_hz``.  Running out of budget marks the locus
    low-confidence instead of failing.
    """
    mirror = channel.real_coeffs and grid.symmetric
    w = grid.omega[grid.omega >= 0] if mirror else np.array(grid.omega)
    w, v = _evaluate(channel.fn, w)
    min_dw = TWO_PI * min_step_hz
    limit = channel.limit_point()
    low = False
    for _ in range(80):
        d = v - about
        mag = np.abs(d)
        guard = GUARD_REL * float(np.median(mag))
        tail = _near_mask(w, channel.tail_omega, limit, about)
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi = np.abs(np.angle(d[1:] / d[:-1]))
        close = (np.minimum(mag[1:], mag[:-1]) < 10.0 * guard) & ~(tail[1:] | tail[:-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            dmag = np.abs(np.log(mag[1:] / mag[:-1]))
        bad = ((dphi > max_dphase) | (dmag > 0.5) | close) & (np.diff(w) > 2.0 * min_dw)
        nbad = int(np.count_nonzero(bad))
        if nbad == 0:
            break
        if w.size + nbad > max_points:
            low = True
            break
        mid = 0.5 * (w[:-1][bad] + w[1:][bad])
        mid, vm = _evaluate(channel.fn, mid)
        w = np.concatenate([w, mid])
        v = np.concatenate([v, vm])
        order = np.argsort(w, kind="stable")
        w, v = w[order], v[order]
    else:
        low = True
    d = v - about
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.nanmax(np.abs(np.angle(d[1:] / d[:-1]))) > np.pi / 2:
            low = True
    if mirror:
        if w[0] == 0.0:
            w = np.concatenate([-w[:0:-1], w])
            v = np.concatenate([np.conj(v[:0:-1]), v])
        else:
            w = np.concatenate([-w[::-1], w])
            v = np.concatenate([np.conj(v[::-1]), v])
    return Locus(w, v, channel.name, domain, channel.rel_degree, complex(channel.asymptote),
                 "asymptote", channel.tail_omega, low)


def _wrap(x):
    return (x + np.pi) % TWO_PI - np.pi


def closure_phase(locus: Locus, about=0j) -> float:
    """Phase picked up while closing the contour through the right half plane."""
    d_first = locus.values[0] - about
    d_last = locus.values[-1] - about
    if locus.closure == "chord":
        return float(_wrap(np.angle(d_first) - np.angle(d_last)))
    limit = locus.limit_point()
    if limit is not None and abs(limit - about) > 0:
        target = np.angle(limit - about)
        return float(_wrap(target - np.angle(d_last)) + _wrap(np.angle(d_first) - target))
    r = locus.rel_degree
    ak = np.angle(locus.asymptote)
    asym_plus = ak - r * np.pi / 2
    asym_minus = ak + r * np.pi / 2
    return float(_wrap(asym_plus - np.angle(d_last)) + r * np.pi
                 + _wrap(np.angle(d_first) - asym_minus))


def winding_number(locus: Locus, about=0j, guard=None) -> int:
    """Counter-clockwise winding of the closed locus about a point."""
    d = locus.values - about
    mag = np.abs(d)
    if guard is None:
        guard = locus.guard(about)
    tail = _near_mask(locus.omega, locus.tail_omega, locus.limit_point(), about)
    check = mag[~tail] if np.any(~tail) else mag
    if check.size and check.min() <= guard:
        k = int(np.argmin(np.where(tail, np.inf, mag)))
        raise OriginPass(f"locus passes within {mag[k]:.3g} of {about} "
                         f"at {locus.omega[k] / TWO_PI:.6g} Hz (guard {guard:.3g})")
    total = float(np.sum(K.phase_increments(locus.values, complex(about))))
    total += closure_phase(locus, about)
    turns = total / TWO_PI
    n = int(np.round(turns))
    if abs(turns - n) > WINDING_RESIDUE:
        raise UnresolvedWinding(f"winding {turns:.3f} is not close to an integer")
    return n


def winding_of(values, about=0j) -> int:
    """Winding of an explicitly closed sample sequence (chord closure)."""
    v = np.asarray(values, dtype=np.complex128)
    loc = Locus(np.arange(v.size, dtype=float), v, closure="chord")
    return winding_number(loc, about)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _plain(x):
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(np.real(x)), "im": float(np.imag(x))}
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class StabilityReport:
    """Verdict of one criterion in one domain, with its evidence."""

    criterion: str
    domain: str
    verdict: Verdict
    encirclements: int | None = None          # counter-clockwise positive
    rhp_open_loop_poles: int | None = None    # P
    rhp_closed_loop_zeros: int | None = None  # Z = N_cw + P
    reason: str | None = None
    caveats: list = field(default_factory=list)
    per_locus: list = field(default_factory=list)
    modes: list = field(default_factory=list)
    low_confidence: bool = False
    evidence: dict = field(default_factory=dict)
    loci: list = field(default_factory=list, repr=False)

    def to_dict(self):
        d = {k: getattr(self, k) for k in (
            "criterion", "domain", "verdict", "encirclements", "rhp_open_loop_poles",
            "rhp_closed_loop_zeros", "reason", "caveats", "per_locus", "modes",
            "low_confidence", "evidence")}
        return _plain(d)


def _verdict_from_z(z):
    if z is None or z < 0:
        return Verdict.INDETERMINATE
    return Verdict.STABLE if z == 0 else Verdict.UNSTABLE


# ---------------------------------------------------------------------------
# argument principle on a rational function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArgumentCheck:
    N: int   # clockwise encirclements of the origin
    Z: int   # right-half-plane zeros
    P: int   # right-half-plane poles
    consistent: bool


def argument_principle_check(rf: RatFun, grid: FreqGrid | None = None,
                             step_hz=0.5, band_hz=100.0) -> ArgumentCheck:
    """Compare the clockwise winding of ``rf`` with its factored RHP census."""
    ch = Channel.from_ratfun(rf, "rf")
    Z = int(np.count_nonzero(rf.zeros.real > 0))
    P = int(np.count_nonzero(rf.poles.real > 0))
    for refine in (1, 4):
        g = grid or FreqGrid.for_roots(ch.roots, band_hz, step_hz / refine)
        loc = sweep(ch, g, max_dphase=MAX_DPHASE / refine)
        N = -winding_number(loc)
        if N == Z - P:
            return ArgumentCheck(N, Z, P, True)
    raise UnresolvedWinding(f"winding gives N={N} but census gives Z-P={Z - P}")


# ---------------------------------------------------------------------------
# determinant criterion
# ---------------------------------------------------------------------------

def _require_stable(m: RatMatrix, label: str):
    rhp, marginal = split_rhp(m.common_den.roots)
    if rhp.size or marginal.size:
        raise OpenLoopUnstable(f"{label} has {rhp.size} right-half-plane and "
                               f"{marginal.size} marginal poles")


def det_channel(zg: RatMatrix, yc: RatMatrix, domain="dq", omega0=100 * np.pi,
                det_rf: RatFun | None = None) -> Channel:
    """Scalar channel ``det(I + Z_g Y_c)`` in the dq or sequence domain."""
    from .smform import det_return_ratio
    d = det_rf if det_rf is not None else det_return_ratio(zg, yc)
    if domain == "dq":
        return Channel.from_ratfun(d, "det")
    from .frames import rotate_to_sequence

    def fn(s):
        s = np.asarray(s) - 1j * omega0
        zp = rotate_to_sequence(zg(s))
        yp = rotate_to_sequence(yc(s))
        return np.linalg.det(np.eye(2) + zp @ yp)
    base = Channel.from_ratfun(d, "det", shift=omega0)
    return Channel(fn, "det", base.rel_degree, base.asymptote, False, base.tail_omega, base.roots)


def determinant_criterion(zg: RatMatrix, yc: RatMatrix, grid: FreqGrid | None = None,
                          domain="dq", omega0=100 * np.pi, step_hz=0.5, band_hz=100.0,
                          check_open_loop=True) -> StabilityReport:
    """Encirclements of the origin by ``det(I + Z_g Y_c)``.

    With both subsystems stable the determinant has no right-half-plane
    pole, so every clockwise encirclement is an unstable closed-loop mode.
    """
    if check_open_loop:
        _require_stable(zg, "grid subsystem")
        _require_stable(yc, "converter subsystem")
    from .smform import det_return_ratio
    d = det_return_ratio(zg, yc)
    ch = det_channel(zg, yc, domain, omega0, det_rf=d)
    g = grid or FreqGrid.for_roots(ch.roots, band_hz, step_hz)
    loc = sweep(ch, g, domain=domain)
    w = winding_number(loc)
    z = -w
    rep = StabilityReport("determinant", domain, _verdict_from_z(z), encirclements=w,
                          rhp_open_loop_poles=0, rhp_closed_loop_zeros=z,
                          low_confidence=loc.low_confidence, loci=[loc])
    rep.evidence["points"] = int(loc.omega.size)
    rep.evidence["min_distance"] = float(np.min(np.abs(loc.values)))
    rep.evidence["factored_rhp_zeros"] = int(np.count_nonzero(d.zeros.real > 0))
    rep.evidence["factored_rhp_poles"] = int(np.count_nonzero(d.poles.real > 0))
    if z < 0:
        rep.reason = "negative zero count: right-half-plane pole in the determinant"
    return rep


# ---------------------------------------------------------------------------
# eigenvalue loci
# ---------------------------------------------------------------------------

def eig2(R):
    """Eigenvalues of stacked 2x2 matrices from the closed-form quadratic.

    The root with the larger magnitude comes from the sign choice that
    avoids cancellation; the other from ``det / mu``.
    """
    R = np.asarray(R, dtype=np.complex128)
    a, b, c, d = R[..., 0, 0], R[..., 0, 1], R[..., 1, 0], R[..., 1, 1]
    tr = a + d
    q = np.sqrt((a - d) ** 2 + 4.0 * b * c)
    sgn = np.where((np.conj(tr) * q).real >= 0, 1.0, -1.0)
    mu1 = 0.5 * (tr + sgn * q)
    det = a * d - b * c
    with np.errstate(divide="ignore", invalid="ignore"):
        mu2 = np.where(mu1 != 0, det / mu1, 0.5 * (tr - sgn * q))
    return mu1, mu2


def eigen_values_at(zg: RatMatrix, yc: RatMatrix, s, domain="dq", omega0=100 * np.pi):
    """``lambda^{1,2}`` of ``I + Z_g Y_c`` at the points ``s``."""
    s = np.asarray(s, dtype=np.complex128)
    if domain == "dq":
        R = zg(s) @ yc(s)
    else:
        from .frames import rotate_to_sequence
        sh = s - 1j * omega0
        R = rotate_to_sequence(zg(sh)) @ rotate_to_sequence(yc(sh))
    m1, m2 = eig2(R)
    return 1.0 + m1, 1.0 + m2


def _track(w, l1, l2):
    a, b = K.track_branches(l1, l2)
    return a, b


def eigen_loci(zg: RatMatrix, yc: RatMatrix, grid: FreqGrid | None = None, domain="dq",
               omega0=100 * np.pi, step_hz=0.5, band_hz=100.0, det_count: int | None = None,
               max_points=MAX_POINTS, min_step_hz=MIN_STEP_HZ):
    """Characteristic loci of ``I + Z_g Y_c`` and the eigenvalue-criterion verdict.

    Returns ``(locus1, locus2, report)``.  Any counter-clockwise
    encirclement by a single locus, or a total that disagrees with the
    determinant count, makes the verdict Indeterminate.
    """
    if zg.shape != (2, 2) or yc.shape != (2, 2):
        raise ValueError("eigenvalue loci need 2x2 matrices")
    from .smform import det_return_ratio
    d = det_return_ratio(zg, yc)
    roots = np.concatenate([d.zeros, d.poles, zg.common_den.roots, yc.common_den.roots])
    g = grid or FreqGrid.for_roots(roots, band_hz, step_hz,
                                   shift=omega0 if domain == "sequence" else 0.0)
    w = np.array(g.omega)
    l1, l2 = eigen_values_at(zg, yc, 1j * w, domain, omega0)
    min_dw = TWO_PI * min_step_hz
    low = False
    for _ in range(80):
        a, b = _track(w, l1, l2)
        steps = []
        for x in (a, b):
            with np.errstate(divide="ignore", invalid="ignore"):
                dphi = np.abs(np.angle(x[1:] / x[:-1]))
            jump = np.abs(np.diff(x)) / np.maximum(np.maximum(np.abs(x[1:]), np.abs(x[:-1])), 1e-300)
            steps.append((dphi > MAX_DPHASE) | (jump > 0.25))
        bad = (steps[0] | steps[1]) & (np.diff(w) > 2.0 * min_dw)
        nbad = int(np.count_nonzero(bad))
        if nbad == 0:
            break
        if w.size + nbad > max_points:
            low = True
            break
        mid = 0.5 * (w[:-1][bad] + w[1:][bad])
        m1, m2 = eigen_values_at(zg, yc, 1j * mid, domain, omega0)
        w = np.concatenate([w, mid])
        l1 = np.concatenate([l1, m1])
        l2 = np.concatenate([l2, m2])
        order = np.argsort(w, kind="stable")
        w, l1, l2 = w[order], l1[order], l2[order]
    a, b = _track(w, l1, l2)
    jumps = [np.abs(np.diff(x)) / np.maximum(np.abs(x[1:]), 1e-300) for x in (a, b)]
    if max(j.max() for j in jumps) > 1.0:
        raise BranchTrackingFailure("eigenvalue branches could not be followed; refine the grid")
    loc1 = Locus(w, a, "lambda1", domain, closure="chord", low_confidence=low)
    loc2 = Locus(w, b, "lambda2", domain, closure="chord", low_confidence=low)

    caveats = []
    exchanged = abs(a[-1] - b[0]) < abs(a[-1] - a[0])
    # each tracked locus is counted on its own, closed by a chord, as one
    # would count it on a plot; only the combined curve is guaranteed closed
    per = [winding_of(a), winding_of(b)]
    total = per[0] + per[1]
    if exchanged:
        caveats.append("branches exchange at infinity; individual loci are not closed curves")
    if det_count is None:
        det_count = winding_number(sweep(det_channel(zg, yc, domain, omega0, det_rf=d),
                                         g, domain=domain))
    rep = StabilityReport("eigenvalue", domain, Verdict.INDETERMINATE, encirclements=total,
                          per_locus=per, low_confidence=low, loci=[loc1, loc2])
    rep.evidence["determinant_encirclements"] = det_count
    rep.evidence["branches_exchanged"] = bool(exchanged)
    if any(n > 0 for n in per):
        caveats.append("anticlockwise encirclement by an eigenvalue locus; "
                       "the square-root branches need not be rational functions")
        rep.reason = "anticlockwise encirclement"
    elif total != det_count:
        rep.reason = "eigenvalue total disagrees with the determinant count"
    else:
        rep.rhp_closed_loop_zeros = -total
        rep.verdict = _verdict_from_z(-total)
    rep.caveats = caveats
    return loc1, loc2, rep


# ---------------------------------------------------------------------------
# Schur-complement loop criterion
# ---------------------------------------------------------------------------

def schur_loop_criterion(zg: RatMatrix, zc: RatMatrix, frame=1, grid: FreqGrid | None = None,
                         domain="dq", step_hz=0.5, band_hz=100.0,
                         use_census=True) -> StabilityReport:
    """Encirclements of ``1 + Z_g^f/Z_c^f`` with the right-half-plane pole census.

    ``Z = N_cw + P``.  Without the census the count alone cannot be trusted
    whenever the equivalent impedances carry right-half-plane poles.
    """
    from .schur import loop_impedance
    ld = loop_impedance(zg, zc, frame)
    f = ld.one_plus_r1d
    ch = Channel.from_ratfun(f, f"1+R{frame}")
    g = grid or FreqGrid.for_roots(ch.roots, band_hz, step_hz)
    loc = sweep(ch, g, domain=domain)
    w = winding_number(loc)
    n_cw = -w
    P = int(np.count_nonzero(f.poles.real > 0))
    rep = StabilityReport("schur-loop", domain, Verdict.INDETERMINATE, encirclements=w,
                          low_confidence=loc.low_confidence, loci=[loc])
    rep.evidence["frame"] = frame
    rep.evidence["loop_rhp_poles"] = int(ld.rhp_poles.size)
    rep.evidence["loop_rhp_zeros"] = int(np.count_nonzero(ld.loop_imp.zeros.real > 0))
    if P:
        rep.caveats.append(f"{P} right-half-plane pole(s) in the loop function; "
                           "encirclements alone would misjudge stability")
    if use_census:
        rep.rhp_open_loop_poles = P
        rep.rhp_closed_loop_zeros = n_cw + P
        rep.verdict = _verdict_from_z(n_cw + P)
    elif P == 0:
        rep.rhp_open_loop_poles = 0
        rep.rhp_closed_loop_zeros = n_cw
        rep.verdict = _verdict_from_z(n_cw)
    else:
        rep.reason = "right-half-plane pole count unknown"
    return rep
