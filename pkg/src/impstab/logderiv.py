"""Logarithmic-derivative criterion on sampled frequency responses.

For a response factored as ``g(w) = a prod(jw - z_i) / prod(jw - p_i)`` the
logarithmic derivative ``D_L = d log g / dw`` is a sum of Lorentzian terms
``j / (jw - z_i)`` minus ``j / (jw - p_i)``.  Near a zero ``z = alpha + j w_z``

    Re D_L = x / (alpha^2 + x^2),   Im D_L = -alpha / (alpha^2 + x^2),   x = w - w_z

so a zero shows up as an extremum of ``Im D_L`` equal to ``-1/alpha``
coinciding with an upward zero crossing of ``Re D_L``.  Poles give the
mirrored signature with a downward crossing and are ignored.  The gain
``a`` drops out entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from . import _kernels as K
from .criteria import StabilityReport, Verdict
from .errors import NonUniformGrid

TWO_PI = 2.0 * np.pi
DEFAULT_STEP_HZ = 0.01
CARRIER_HALF_WIDTH_HZ = 0.5
COLOCATION_STEPS = 2
COLOCATION_ALPHA = 0.25   # crossing window as a fraction of |alpha|
DOMAIN_RTOL = 0.05
FIT_QUALITY_MAX = 0.1     # refined modes fitting worse than this are not confirmed
RICHER_MODEL_GAIN = 5.0   # residual reduction required to prefer a two-root model
TINY = 1e-300


@dataclass(frozen=True, eq=False)
class FreqResponse:
    """Samples of one scalar channel.  ``kind`` is ``"loop"`` or ``"eigenvalue"``."""

    omega: np.ndarray
    values: np.ndarray
    name: str = "channel"
    domain: str = "dq"
    kind: str = "loop"

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.complex128)
        if w.shape != v.shape or w.ndim != 1:
            raise ValueError("omega and values must be 1-D arrays of equal length")
        if w.size > 1 and np.any(np.diff(w) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fn, omega, **kw):
        omega = np.asarray(omega, dtype=np.float64)
        return cls(omega, np.asarray(fn(1j * omega), dtype=np.complex128), **kw)

    @property
    def freq_hz(self):
        return self.omega / TWO_PI

    def uniform_step(self, rtol=1e-6):
        """The common spacing, or ``None`` when the grid is not uniform."""
        if self.omega.size < 2:
            return None
        d = np.diff(self.omega)
        h = (self.omega[-1] - self.omega[0]) / (self.omega.size - 1)
        return float(h) if np.all(np.abs(d - h) <= rtol * abs(h)) else None

    def resampled(self, step):
        """Linear interpolation of real and imaginary parts on a uniform grid."""
        w0, w1 = self.omega[0], self.omega[-1]
        n = int(np.floor((w1 - w0) / step + 1e-9))
        w = w0 + step * np.arange(n + 1)
        v = np.interp(w, self.omega, self.values.real) + 1j * np.interp(w, self.omega, self.values.imag)
        return replace(self, omega=w, values=v)


@dataclass(frozen=True, eq=False)
class LogDerivTrace:
    omega: np.ndarray
    dl: np.ndarray
    step: float
    mask: np.ndarray                  # True where the sample is unusable
    mask_reason: tuple = ()           # per-sample reason ("" when unmasked)
    name: str = "channel"
    domain: str = "dq"
    kind: str = "loop"

    @property
    def re(self):
        return self.dl.real

    @property
    def im(self):
        return self.dl.imag

    @property
    def freq_hz(self):
        return self.omega / TWO_PI


@dataclass(frozen=True)
class ModeEstimate:
    omega_z: float        # rad/s
    alpha_z: float        # 1/s, positive means unstable
    im_extreme: float
    re_slope: float
    quality: float = 0.0  # relative residual of the local model fit
    model: str = "vertex"
    channel: str = "channel"
    domain: str = "dq"
    flags: tuple = ()

    @property
    def unstable(self) -> bool:
        return self.alpha_z > 0

    @property
    def freq_hz(self):
        return self.omega_z / TWO_PI

    def to_dict(self):
        return {"omega_z": self.omega_z, "freq_hz": self.freq_hz, "alpha_z": self.alpha_z,
                "im_extreme": self.im_extreme, "re_slope": self.re_slope,
                "quality": self.quality, "model": self.model, "channel": self.channel,
                "domain": self.domain, "unstable": self.unstable, "flags": list(self.flags)}


def log_derivative(samples: FreqResponse, step: float | None = None,
                   carriers=(), half_width_hz=CARRIER_HALF_WIDTH_HZ) -> LogDerivTrace:
    """Central-difference logarithmic derivative on a uniform grid.

    ``carriers`` lists frequencies (rad/s) whose neighbourhoods are masked.
    """
    h = samples.uniform_step()
    if h is None or (step is not None and not np.isclose(h, step, rtol=1e-6)):
        raise NonUniformGrid("samples must be uniformly spaced at the given step; resample first")
    g = samples.values
    dl = K.central_logderiv(g, h)
    reason = np.full(g.size, "", dtype=object)
    tiny = np.abs(g) <= TINY * max(np.max(np.abs(g)), TINY)
    reason[tiny] = "tiny"
    for c in carriers:
        near = np.abs(samples.omega - c) <= TWO_PI * half_width_hz
        reason[near & (reason == "")] = "carrier"
    bad = ~np.isfinite(dl)
    reason[bad & (reason == "")] = "nonfinite"
    mask = reason != ""
    dl = np.where(mask, np.nan + 0j, dl)
    return LogDerivTrace(samples.omega, dl, h, mask, tuple(reason), samples.name,
                         samples.domain, samples.kind)


def _vertex(w, im, k, h):
    """Vertex of the parabola through ``1/Im`` at ``k-1, k, k+1`` (exact for one factor)."""
    y0, y1, y2 = 1.0 / im[k - 1], 1.0 / im[k], 1.0 / im[k + 1]
    curv = y0 - 2.0 * y1 + y2
    if curv == 0 or not np.isfinite(curv):
        return w[k], y1
    off = 0.5 * (y0 - y2) / curv
    if abs(off) > 1.0:
        return w[k], y1
    return w[k] + off * h, y1 - 0.25 * (y0 - y2) * off


def _well(im, k, reach, is_min):
    """Index range around extremum ``k`` over which ``Im`` stays monotone, within ``reach``.

    A crossing of ``Re`` outside this range belongs to a neighbouring root.
    """
    sgn = 1.0 if is_min else -1.0
    n = im.size
    lo = k
    while lo > max(k - reach, 0) and np.isfinite(im[lo - 1]) and sgn * (im[lo - 1] - im[lo]) > 0:
        lo -= 1
    hi = k
    while hi < min(k + reach, n - 1) and np.isfinite(im[hi + 1]) and sgn * (im[hi + 1] - im[hi]) > 0:
        hi += 1
    # never narrower than the fixed colocation window
    return min(lo, max(k - COLOCATION_STEPS, 0)), max(hi, min(k + COLOCATION_STEPS, n - 1))


def find_modes(trace: LogDerivTrace, colocation=COLOCATION_STEPS) -> list:
    """Zeros identified from extrema of ``Im D_L`` with an upward ``Re D_L`` crossing."""
    im, re, w, h = trace.im, trace.re, trace.omega, trace.step
    n = w.size
    out = []
    for k in range(1, n - 1):
        if trace.mask[k - 1] or trace.mask[k] or trace.mask[k + 1]:
            continue
        a, b, c = im[k - 1], im[k], im[k + 1]
        is_min = b < a and b <= c and b < 0
        is_max = b > a and b >= c and b > 0
        if not (is_min or is_max):
            continue
        wz, vtx = _vertex(w, im, k, h)
        if vtx == 0 or not np.isfinite(vtx):
            continue
        # other roots add a smooth background to Re D_L that shifts the
        # crossing by roughly background * alpha^2, so the window grows with alpha
        reach = max(colocation, int(np.ceil(COLOCATION_ALPHA * abs(vtx) / h)))
        lo, hi = _well(im, k, reach, is_min)
        seg = re[lo:hi + 1]
        if np.any(~np.isfinite(seg)):
            continue
        cross = np.flatnonzero((seg[:-1] <= 0) & (seg[1:] > 0))
        if cross.size == 0:
            continue
        alpha = -vtx
        slope = (re[k + 1] - re[k - 1]) / (2.0 * h)
        out.append(ModeEstimate(float(wz), float(alpha), float(1.0 / vtx), float(slope),
                                channel=trace.name, domain=trace.domain))
    return out


# ---------------------------------------------------------------------------
# local model fit
# ---------------------------------------------------------------------------

def _lorentz(w, alpha, wz, sign):
    # sign +1 for a zero, -1 for a pole
    return sign * 1j / (1j * (w - wz) - alpha)


def _fit(w, y, terms, x0, mirror=None):
    """Least-squares fit of a sum of Lorentzians on a linear complex background.

    ``x0`` lists ``alpha, w`` per term; the four background parameters are
    appended here.  With ``mirror`` set to a frequency ``c`` every term also
    appears at ``2c - w``, the image of a conjugate root pair.  Returns the
    solution, the relative residual and the residual vector.
    """
    wc = 0.5 * (w[0] + w[-1])
    span = max(0.5 * (w[-1] - w[0]), TINY)

    def model(x):
        u = (w - wc) / span
        out = (x[-4] + 1j * x[-3]) + (x[-2] + 1j * x[-1]) * u
        for t, sign in enumerate(terms):
            out = out + _lorentz(w, x[2 * t], x[2 * t + 1], sign)
            if mirror is not None:
                out = out + _lorentz(w, x[2 * t], 2.0 * mirror - x[2 * t + 1], sign)
        return out

    def resid(x):
        r = model(x) - y
        return np.concatenate([r.real, r.imag])

    sol = scipy.optimize.least_squares(resid, list(x0) + [0.0] * 4, method="lm",
                                       xtol=1e-14, ftol=1e-14, max_nfev=4000)
    r = model(sol.x) - y
    q = float(np.sqrt(np.mean(np.abs(r) ** 2)) / max(np.sqrt(np.mean(np.abs(y) ** 2)), TINY))
    return sol, q, r


def refine_mode(trace: LogDerivTrace, seed: ModeEstimate, window_steps: int = 20,
                center: float | None = None) -> ModeEstimate:
    """Refine a mode by fitting the Lorentzian model over a window around it.

    Three local models are tried: the zero alone, the zero with a nearby
    pole, and the zero with a second nearby zero.  Closed-loop modes come
    in conjugate pairs, which appear mirrored about the domain centre
    (0 in dq, ``center`` otherwise); a term near the centre carries its
    image.  A richer model is kept only when it lowers the residual
    fivefold.  When no model leaves a residual below ``FIT_QUALITY_MAX`` the
    mode is flagged ``unconfirmed``; on failure the seed is returned with a
    ``fit_failed`` flag.
    """
    h = trace.step
    half = max(window_steps * h, 4.0 * abs(seed.alpha_z))
    sel = (np.abs(trace.omega - seed.omega_z) <= half) & ~trace.mask
    w, y = trace.omega[sel], trace.dl[sel]
    if w.size < 8:
        return replace(seed, flags=seed.flags + ("window_too_small",))
    if center is None and trace.domain == "dq":
        center = 0.0
    mirror = center if center is not None and abs(seed.omega_z - center) < 2.0 * half else None
    try:
        a0, w0 = seed.alpha_z, seed.omega_z
        sol1, q1, r = _fit(w, y, (1,), [a0, w0], mirror)
        best = ("zero", sol1, q1)
        q_min = q1
        kmax = int(np.argmax(np.abs(r)))
        wk = w[kmax] if abs(w[kmax] - sol1.x[1]) > h else sol1.x[1] + 2 * h
        for name, terms, sgn in (("zero+pole", (1, -1), -1.0), ("zero+zero", (1, 1), 1.0)):
            x0 = [sol1.x[0], sol1.x[1], sgn * abs(sol1.x[0]) * 1.2, wk]
            sol, q, _ = _fit(w, y, terms, x0, mirror)
            if not (sol.success and np.all(np.isfinite(sol.x))):
                continue
            q_min = min(q_min, q)
            if q < best[2] / RICHER_MODEL_GAIN:
                best = (name, sol, q)
        name, sol, q = best
        x = sol.x
        alpha, wz = float(x[0]), float(x[1])
        if name == "zero+zero" and abs(x[3] - seed.omega_z) < abs(wz - seed.omega_z):
            alpha, wz = float(x[2]), float(x[3])
        if not (np.isfinite(alpha) and np.isfinite(wz)) or alpha == 0 or abs(wz - seed.omega_z) > half:
            raise RuntimeError("fit left the window")
        flags = seed.flags + (("unconfirmed",) if q_min > FIT_QUALITY_MAX else ())
        return replace(seed, omega_z=wz, alpha_z=alpha, im_extreme=-1.0 / alpha,
                       quality=q, model=name, flags=flags)
    except Exception:
        return replace(seed, flags=seed.flags + ("fit_failed",))


@dataclass(frozen=True)
class ExtremumCheck:
    first_derivative: float
    second_derivative: float
    expected_second: float
    rel_error: float
    ok: bool


def verify_extremum(fn, mode: ModeEstimate, step: float, rtol=0.10) -> ExtremumCheck:
    """Check ``dIm/dw = 0`` and ``d2Im/dw2 = 2/alpha^3`` by local resampling of ``fn(s)``."""
    alpha = mode.alpha_z
    h = min(step, abs(alpha) / 20.0)
    k = np.arange(-3, 4)
    w = mode.omega_z + h * k
    g = np.asarray(fn(1j * w), dtype=np.complex128)
    im = K.central_logderiv(g, h).imag[1:-1]          # samples at k = -2..2
    d1 = (im[3] - im[1]) / (2 * h)
    d2 = (im[3] - 2 * im[2] + im[1]) / h ** 2
    expect = 2.0 / alpha ** 3
    rel = abs(d2 - expect) / abs(expect)
    scale = abs(im[2]) / abs(alpha)
    return ExtremumCheck(float(d1), float(d2), float(expect), float(rel),
                         bool(rel <= rtol and abs(d1) <= 0.1 * scale))


# ---------------------------------------------------------------------------
# verdict from loop channels
# ---------------------------------------------------------------------------

def analyze_channel(resp: FreqResponse, carriers=(), refine=True, center=None):
    """Trace and modes of one channel; ``center`` is the conjugate-mirror frequency."""
    trace = log_derivative(resp, carriers=carriers)
    modes = find_modes(trace)
    if refine:
        modes = [_confirm(refine_mode(trace, m, center=center)) if m.unstable else m
                 for m in modes]
    return trace, modes


def _confirm(mode: ModeEstimate) -> ModeEstimate:
    # a broad weak extremum shaped by neighbouring roots fits no local model
    if "fit_failed" in mode.flags and "unconfirmed" not in mode.flags:
        return replace(mode, flags=mode.flags + ("unconfirmed",))
    return mode


def _to_dq(omega, domain, omega0):
    return omega - omega0 if domain == "sequence" else omega


def stability_from_loops(channels, omega0=100 * np.pi, carriers_by_domain=None,
                         refine=True, rtol=DOMAIN_RTOL, match_hz=1.0) -> StabilityReport:
    """Verdict from the logarithmic derivative of each loop channel.

    Eigenvalue channels are analysed but flagged as non-physical and kept
    out of the verdict, as are unstable candidates whose local fit fails or is poor.
    When several domains are given, every unstable
    mode must appear in each of them (frequencies mapped by the ``w0``
    shift) with ``alpha`` within ``rtol``; otherwise the verdict is
    Indeterminate.
    """
    carriers_by_domain = carriers_by_domain or {}
    traces, per_domain, nonphysical, rejected = [], {}, [], []
    for resp in channels:
        center = omega0 if resp.domain == "sequence" else 0.0
        trace, modes = analyze_channel(resp, carriers_by_domain.get(resp.domain, ()), refine,
                                       center)
        traces.append(trace)
        if resp.kind != "loop":
            nonphysical.extend(modes)
            continue
        rejected.extend(m for m in modes if "unconfirmed" in m.flags)
        per_domain.setdefault(resp.domain, []).extend(m for m in modes if "unconfirmed" not in m.flags)

    domains = sorted(per_domain)
    label = "+".join(domains) if domains else "none"
    rep = StabilityReport("logderiv", label, Verdict.INDETERMINATE)
    rep.evidence["traces"] = [t.name + "@" + t.domain for t in traces]
    rep.loci = traces
    unstable = {d: [m for m in per_domain[d] if m.unstable] for d in domains}
    rep.modes = [m.to_dict() for d in domains for m in per_domain[d] if m.unstable]
    rep.evidence["stable_modes"] = sum(1 for d in domains for m in per_domain[d] if not m.unstable)
    if nonphysical:
        rep.caveats.append(f"{len(nonphysical)} mode(s) from eigenvalue loci ignored: "
                           "eigenvalue loci do not carry the closed-loop modes")
        rep.evidence["nonphysical_modes"] = [m.to_dict() for m in nonphysical]
    if rejected:
        rep.evidence["rejected_modes"] = [m.to_dict() for m in rejected]
        rep.caveats.append(f"{len(rejected)} candidate mode(s) rejected: local fit failed "
                           f"or left a residual above {FIT_QUALITY_MAX:g}")
    if not domains:
        rep.reason = "no loop channels"
        return rep
    verdicts = {d: (Verdict.UNSTABLE if unstable[d] else Verdict.STABLE) for d in domains}
    rep.evidence["domain_verdicts"] = {d: v.value for d, v in verdicts.items()}
    if len(set(verdicts.values())) > 1:
        rep.reason = "InconsistentDomains"
        return rep
    if len(domains) > 1:
        ref = domains[0]
        tol_w = TWO_PI * match_hz
        for other in domains[1:]:
            for m in unstable[ref]:
                wz = _to_dq(m.omega_z, ref, omega0)
                cands = [c for c in unstable[other]
                         if abs(_to_dq(c.omega_z, other, omega0) - wz) <= tol_w]
                if not cands or min(abs(c.alpha_z - m.alpha_z) for c in cands) > rtol * abs(m.alpha_z):
                    rep.reason = "InconsistentDomains"
                    return rep
    rep.verdict = verdicts[domains[0]]
    distinct = []
    for m in unstable[domains[0]]:
        if all(abs(m.omega_z - o) > TWO_PI * match_hz for o in distinct):
            distinct.append(m.omega_z)
    rep.rhp_closed_loop_zeros = len(distinct)
    return rep
