"""Reference system builders.

A representative grid-following voltage source converter (VSC) with DC-link
voltage control, current control and a PLL, linearized in the grid dq frame;
an RL grid; 3x3 transfer immittances with an explicit DC port; and the small
DC transmission block systems used to compare determinant formulations.

SI units throughout, angular frequency in rad/s.  Three-phase quantities are
amplitude-invariant dq components, so ``P = 1.5 (v_d i_d + v_q i_q)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.signal

from .criteria import (Channel, FreqGrid, StabilityReport, Verdict, _verdict_from_z, sweep,
                       winding_number)
from .errors import OperatingPointInfeasible, PortNotAvailable
from .ratfun import TOL_CANCEL, FactoredPoly, RatFun, RatSum, split_rhp
from .smform import det_return_ratio
from .statespace import RatMatrix, StateSpace, static_interconnect, transfer_matrix

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])   # multiplication by j on dq vectors
VSC_STATES = ("i_d", "i_q", "v_dc", "x_d", "x_q", "x_v", "x_pll", "theta")
PC_STATES = ("i_d", "i_q", "x_d", "x_q", "x_p", "x_pll", "theta")


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VscParams:
    """Grid-following VSC with DC-link voltage control.

    Gains are in SI: ``kp_i`` in V/A, ``kp_v`` in A/V, ``kp_pll`` in
    rad/s per V.  ``P0`` is the active power delivered to the AC grid,
    ``V0`` the peak phase voltage at the terminal.
    """

    L_f: float = 0.27e-3
    R_f: float = 3.2e-3
    C_dc: float = 28e-3
    kp_i: float = 0.8
    ki_i: float = 16.6
    kp_v: float = 3.2
    ki_v: float = 257.0
    kp_pll: float = 0.024
    ki_pll: float = 75.0
    P0: float = 740e3
    V0: float = 563.0
    V_dc0: float = 1200.0
    Q0: float = -414e3
    kff: float = 1.0
    omega0: float = 100 * np.pi
    dc_compensation: bool = True
    # active-power loop, used only by the power-control variant
    kp_p: float = 2e-5
    ki_p: float = 4e-3

    def __post_init__(self):
        for name in ("L_f", "C_dc", "kp_i", "ki_i", "kp_v", "ki_v", "V0", "V_dc0", "omega0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("R_f", "kp_pll", "ki_pll", "kff", "kp_p", "ki_p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def with_(self, **kw) -> "VscParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class GridParams:
    L_g: float = 1.0e-3
    R_g: float = 0.257
    omega0: float = 100 * np.pi

    def __post_init__(self):
        if self.L_g < 0 or self.R_g < 0:
            raise ValueError("L_g and R_g must be non-negative")
        if self.L_g == 0 and self.R_g == 0:
            raise ValueError("L_g and R_g cannot both be zero")


@dataclass(frozen=True)
class OperatingPoint:
    v: np.ndarray      # terminal voltage (dq)
    i: np.ndarray      # current delivered to the grid (dq)
    e: np.ndarray      # converter AC voltage (dq)
    P_e: float         # power leaving the DC link


def operating_point(p: VscParams) -> OperatingPoint:
    """Steady state with the grid frame aligned to the terminal voltage."""
    v = np.array([p.V0, 0.0])
    i = np.array([p.P0, -p.Q0]) / (1.5 * p.V0)
    e = v + p.R_f * i + p.omega0 * p.L_f * (J2 @ i)
    if np.hypot(*e) > p.V_dc0 / np.sqrt(3.0):
        raise OperatingPointInfeasible(
            f"converter voltage {np.hypot(*e):.1f} V exceeds the linear modulation "
            f"limit {p.V_dc0 / np.sqrt(3.0):.1f} V")
    P_e = 1.5 * float(e @ i)
    return OperatingPoint(v, i, e, P_e)


# ---------------------------------------------------------------------------
# VSC with DC-link voltage control
# ---------------------------------------------------------------------------

def _vsc_matrices(p: VscParams):
    """State matrices of the 8-state model with inputs (v_d, v_q, i_0)."""
    op = operating_point(p)
    n = 8
    iI, iV, iX, iXV, iPLL, iTH = slice(0, 2), 2, slice(3, 5), 5, 6, 7
    A = np.zeros((n, n))
    B = np.zeros((n, 3))

    # controller-frame measurements: v_c = v - theta J v0, i_c = i - theta J i0
    Jv0, Ji0, Je0 = J2 @ op.v, J2 @ op.i, J2 @ op.e
    # linear maps: each quantity as (coefficients on x, coefficients on u)
    def zeros2():
        return np.zeros((2, n)), np.zeros((2, 3))
    vc_x, vc_u = zeros2()
    vc_u[:, :2] = np.eye(2)
    vc_x[:, iTH] = -Jv0
    ic_x, ic_u = zeros2()
    ic_x[:, iI] = np.eye(2)
    ic_x[:, iTH] = -Ji0

    # PLL on the controller-frame q voltage
    A[iPLL] = p.ki_pll * vc_x[1]
    B[iPLL] = p.ki_pll * vc_u[1]
    A[iTH] = p.kp_pll * vc_x[1]
    A[iTH, iPLL] += 1.0
    B[iTH] = p.kp_pll * vc_u[1]

    # DC-link voltage loop sets the d-axis current reference
    A[iXV, iV] = p.ki_v
    iref_x = np.zeros((2, n))
    iref_x[0, iV] = p.kp_v
    iref_x[0, iXV] = 1.0

    # current PI in the controller frame
    err_x, err_u = iref_x - ic_x, -ic_u
    A[iX] = p.ki_i * err_x
    B[iX] = p.ki_i * err_u
    ec_x = p.kff * vc_x + p.omega0 * p.L_f * (J2 @ ic_x) + p.kp_i * err_x
    ec_x[:, iX] += np.eye(2)
    ec_u = p.kff * vc_u + p.omega0 * p.L_f * (J2 @ ic_u) + p.kp_i * err_u

    # back to the grid frame, optionally scaled by the actual DC voltage
    e_x, e_u = ec_x.copy(), ec_u.copy()
    e_x[:, iTH] += Je0
    if not p.dc_compensation:
        e_x[:, iV] += op.e / p.V_dc0

    # filter: L di/dt = e - v - R i - w0 L J i
    A[iI] = e_x / p.L_f
    A[iI, iI] += (-p.R_f * np.eye(2) - p.omega0 * p.L_f * J2) / p.L_f
    B[iI] = e_u / p.L_f
    B[iI, :2] -= np.eye(2) / p.L_f

    # DC link: C dv/dt = i_0 - P_e / v_dc
    dP_x = 1.5 * (op.e @ np.eye(2, n) + op.i @ e_x)
    dP_u = 1.5 * (op.i @ e_u)
    A[iV] = (-dP_x / p.V_dc0) / p.C_dc
    A[iV, iV] += op.P_e / p.V_dc0 ** 2 / p.C_dc
    B[iV] = (-dP_u / p.V_dc0) / p.C_dc
    B[iV, 2] += 1.0 / p.C_dc
    return A, B


def build_vsc(p: VscParams | None = None) -> StateSpace:
    """Admittance ``Y_c``: terminal voltage in, current into the converter out."""
    p = p or VscParams()
    A, B = _vsc_matrices(p)
    C = np.zeros((2, 8))
    C[:, :2] = -np.eye(2)
    return StateSpace(A, B[:, :2], C, np.zeros((2, 2)),
                      input_labels=("v_d", "v_q"), output_labels=("i_d", "i_q"))


def build_vsc_3port(p: VscParams | None = None) -> StateSpace:
    """AC admittance plus DC port: inputs (v_d, v_q, i_0), outputs (i_d, i_q, v_dc)."""
    p = p or VscParams()
    A, B = _vsc_matrices(p)
    C = np.zeros((3, 8))
    C[:2, :2] = -np.eye(2)
    C[2, 2] = 1.0
    return StateSpace(A, B, C, np.zeros((3, 3)),
                      input_labels=("v_d", "v_q", "i_0"), output_labels=("i_d", "i_q", "v_dc"))


def build_vsc_power_control(p: VscParams | None = None) -> StateSpace:
    """Power-controlled VSC fed from a DC voltage.

    Seven states (currents, current-loop integrators, power-loop integrator,
    PLL).  Inputs (v_d, v_q, v_dc), outputs (i_d, i_q, i_0) with ``i_0`` the
    current drawn from the DC network and the AC current flowing into the
    converter.
    """
    p = p or VscParams()
    op = operating_point(p)
    n = 7
    iI, iX, iXP, iPLL, iTH = slice(0, 2), slice(2, 4), 4, 5, 6
    A = np.zeros((n, n))
    B = np.zeros((n, 3))
    Jv0, Ji0, Je0 = J2 @ op.v, J2 @ op.i, J2 @ op.e

    vc_x, vc_u = np.zeros((2, n)), np.zeros((2, 3))
    vc_u[:, :2] = np.eye(2)
    vc_x[:, iTH] = -Jv0
    ic_x = np.zeros((2, n))
    ic_x[:, iI] = np.eye(2)
    ic_x[:, iTH] = -Ji0

    A[iPLL] = p.ki_pll * vc_x[1]
    B[iPLL] = p.ki_pll * vc_u[1]
    A[iTH] = p.kp_pll * vc_x[1]
    A[iTH, iPLL] += 1.0
    B[iTH] = p.kp_pll * vc_u[1]

    # measured power, frame independent to first order
    dP_x = 1.5 * (op.v @ np.eye(2, n))
    dP_u = np.zeros(3)
    dP_u[:2] = 1.5 * op.i
    A[iXP] = -p.ki_p * dP_x
    B[iXP] = -p.ki_p * dP_u
    iref_x, iref_u = np.zeros((2, n)), np.zeros((2, 3))
    iref_x[0] = -p.kp_p * dP_x
    iref_x[0, iXP] += 1.0
    iref_u[0] = -p.kp_p * dP_u

    err_x, err_u = iref_x - ic_x, iref_u
    A[iX] = p.ki_i * err_x
    B[iX] = p.ki_i * err_u
    e_x = p.kff * vc_x + p.omega0 * p.L_f * (J2 @ ic_x) + p.kp_i * err_x
    e_x[:, iX] += np.eye(2)
    e_u = p.kff * vc_u + p.kp_i * err_u
    e_x[:, iTH] += Je0
    if not p.dc_compensation:
        e_u[:, 2] += op.e / p.V_dc0

    A[iI] = e_x / p.L_f
    A[iI, iI] += (-p.R_f * np.eye(2) - p.omega0 * p.L_f * J2) / p.L_f
    B[iI] = e_u / p.L_f
    B[iI, :2] -= np.eye(2) / p.L_f

    # i_0 = P_e / v_dc
    dPe_x = 1.5 * (op.e @ np.eye(2, n) + op.i @ e_x)
    dPe_u = 1.5 * (op.i @ e_u)
    C = np.zeros((3, n))
    D = np.zeros((3, 3))
    C[:2, :2] = -np.eye(2)
    C[2] = dPe_x / p.V_dc0
    D[2] = dPe_u / p.V_dc0
    D[2, 2] -= op.P_e / p.V_dc0 ** 2
    return StateSpace(A, B, C, D, input_labels=("v_d", "v_q", "v_dc"),
                      output_labels=("i_d", "i_q", "i_0"))


# ---------------------------------------------------------------------------
# transfer immittances
# ---------------------------------------------------------------------------

class ControlMode(str, enum.Enum):
    POWER = "PowerControl"
    DC_VOLTAGE = "DcVoltageControl"


_LAYOUT = {
    ControlMode.POWER: (("v_d", "v_q", "v_dc"), ("i_d", "i_q", "i_0")),
    ControlMode.DC_VOLTAGE: (("v_d", "v_q", "i_0"), ("i_d", "i_q", "v_dc")),
}
_UNITS = {
    ControlMode.POWER: (("S", "S", "S"), ("S", "S", "S"), ("S", "S", "S")),
    ControlMode.DC_VOLTAGE: (("S", "S", "1"), ("S", "S", "1"), ("1", "1", "Ohm")),
}


@dataclass(frozen=True, eq=False)
class TransferImmittance:
    """3x3 hybrid matrix between AC (two axes) and DC ports."""

    matrix: RatMatrix
    mode: ControlMode
    units: tuple = field(default=())
    inputs: tuple = field(default=())
    outputs: tuple = field(default=())

    def __call__(self, s):
        return self.matrix(s)


def _mode_of(ss: StateSpace):
    for mode, layout in _LAYOUT.items():
        if (tuple(ss.input_labels), tuple(ss.output_labels)) == layout:
            return mode
    return None


def swap_dc_port(m: RatMatrix, tol_cancel: float = TOL_CANCEL) -> RatMatrix:
    """Partial inversion of the third port.

    ``[y_a; y3] = M [u_a; u3]`` becomes ``[y_a; u3] = M' [u_a; y3]`` with
    ``M'_aa = M_aa - M_a3 M_3a / M_33``, ``M'_a3 = M_a3 / M_33``,
    ``M'_3a = -M_3a / M_33`` and ``M'_33 = 1 / M_33``.
    """
    if m.shape != (3, 3):
        raise PortNotAvailable(f"expected a 3x3 matrix, got {m.shape}")
    h33 = m[2, 2]
    if h33.is_zero:
        raise PortNotAvailable("the DC-port entry is identically zero and cannot be inverted")
    S = m.sums()
    inv = RatSum([(1.0 / h33.gain, h33.poles, h33.zeros)], h33.real_coeffs)
    rows = [[None] * 3 for _ in range(3)]
    for a in range(2):
        for b in range(2):
            rows[a][b] = (S[a][b] - S[a][2] * S[2][b] * inv).to_ratfun(tol_cancel)
        rows[a][2] = (S[a][2] * inv).to_ratfun(tol_cancel)
        rows[2][a] = (-(S[2][a] * inv)).to_ratfun(tol_cancel)
    rows[2][2] = inv.to_ratfun(tol_cancel)
    return RatMatrix(rows)


def build_transfer_immittance(ss: StateSpace, mode: ControlMode | str,
                              tol_cancel: float = TOL_CANCEL) -> TransferImmittance:
    """Transfer immittance of a three-port model in the requested layout.

    A model already in the requested layout is converted directly.  A
    DC-voltage-controlled model asked for the power-control layout is
    re-partitioned by inverting its DC port.  The reverse direction is
    refused: the DC-voltage layout needs the DC voltage as a state.
    """
    mode = ControlMode(mode)
    if ss.m != 3 or ss.p != 3:
        raise PortNotAvailable(f"model has {ss.m} inputs and {ss.p} outputs; need 3 and 3")
    have = _mode_of(ss)
    if have is None:
        raise PortNotAvailable(f"unrecognised port layout {ss.input_labels} -> {ss.output_labels}")
    m = transfer_matrix(ss, tol_cancel)
    if have != mode:
        if have == ControlMode.POWER:
            raise PortNotAvailable("DC voltage is an input of this model, not a state")
        m = swap_dc_port(m, tol_cancel)
    ins, outs = _LAYOUT[mode]
    return TransferImmittance(m, mode, _UNITS[mode], ins, outs)


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

def build_rl_grid(g: GridParams | None = None) -> RatMatrix:
    """dq impedance of a series RL grid."""
    g = g or GridParams()
    x = g.omega0 * g.L_g
    if g.L_g > 0:
        diag = RatFun(FactoredPoly(g.L_g, [-g.R_g / g.L_g]))
    else:
        diag = RatFun.const(g.R_g)
    return RatMatrix([[diag, RatFun.const(-x)], [RatFun.const(x), diag]])


def rl_grid_impedance_ss(g: GridParams | None = None) -> StateSpace:
    """Stateless impedance realization ``v = (R + w0 L J) i + L di/dt``."""
    g = g or GridParams()
    D = g.R_g * np.eye(2) + g.omega0 * g.L_g * J2
    return StateSpace(np.zeros((0, 0)), np.zeros((0, 2)), np.zeros((2, 0)), D,
                      E=g.L_g * np.eye(2), input_labels=("i_d", "i_q"),
                      output_labels=("v_d", "v_q"))


def rl_grid_admittance_ss(g: GridParams | None = None) -> StateSpace:
    """Two-state admittance realization, requires ``L_g > 0``."""
    g = g or GridParams()
    if g.L_g <= 0:
        raise ValueError("an admittance realization needs L_g > 0")
    A = -(g.R_g / g.L_g) * np.eye(2) - g.omega0 * J2
    return StateSpace(A, np.eye(2) / g.L_g, np.eye(2), np.zeros((2, 2)),
                      input_labels=("v_d", "v_q"), output_labels=("i_d", "i_q"))


# ---------------------------------------------------------------------------
# DC transmission block systems
# ---------------------------------------------------------------------------

def realize(rf: RatFun) -> StateSpace:
    """Controllable-form realization of a proper scalar rational function."""
    if rf.rel_degree < 0:
        raise ValueError("only proper functions have a state-space realization")
    num = rf.num.coeffs()[::-1].real
    den = rf.den.coeffs()[::-1].real
    if rf.is_zero:
        num = np.zeros(1)
    A, B, C, D = scipy.signal.tf2ss(num, den)
    return StateSpace(A, B, C, D)


@dataclass(frozen=True, eq=False)
class P2PSystem:
    """Block system ``Z_con``/``Y_g`` with its return-difference determinant."""

    z_con: RatMatrix
    y_g: RatMatrix
    det: RatFun          # det(I + Z_con Y_g) from the block matrices
    closed_form: RatFun  # the scalar identity it must equal


def build_p2p_dc(Zr, Ys, Zcable, tol_cancel: float = TOL_CANCEL) -> P2PSystem:
    """Point-to-point DC link: receiving end in impedance form, sending end
    in admittance form, cable in series with the sending end.

    ``[v_r; i_s] = diag(Z_r, Y_s) [i_r; v_s]`` and
    ``[i_r; v_s] = [[0, -1], [1, Z_cable]] [v_r; i_s]``.
    ``Z_cable = 0`` gives the back-to-back link.
    """
    Zr, Ys, Zc = (x if isinstance(x, RatFun) else RatFun.const(x) for x in (Zr, Ys, Zcable))
    zero, one = RatFun.const(0.0), RatFun.const(1.0)
    z_con = RatMatrix([[Zr, zero], [zero, Ys]])
    y_g = RatMatrix([[zero, -one], [one, Zc]])
    det = det_return_ratio(z_con, y_g, tol_cancel)
    closed = (RatSum.of(1.0) + RatSum.of(Ys) * (RatSum.of(Zc) + RatSum.of(Zr))).to_ratfun(tol_cancel)
    return P2PSystem(z_con, y_g, det, closed)


def p2p_oracle(Zr: RatFun, Ys: RatFun, Zcable: RatFun) -> np.ndarray:
    """Closed-loop eigenvalues of the three blocks wired as a DC link.

    Blocks: ``Z_r`` (i_r -> v_r), ``Y_s`` (v_s -> i_s), ``Z_cable``
    (i_s -> cable drop).  ``Y_s`` draws ``i_s`` from the link, so the
    wiring is ``i_r = i_s``, ``v_s = -(v_r + drop)`` and the cable carries
    ``i_s``, which closes the loop on ``1 + Y_s (Z_r + Z_cable)``.
    """
    from .statespace import eigenvalues
    K = np.array([[0.0, 1.0, 0.0],
                  [-1.0, 0.0, -1.0],
                  [0.0, 1.0, 0.0]])
    cl = static_interconnect([realize(Zr), realize(Ys), realize(Zcable)], K)
    return eigenvalues(cl.A) if cl.n else np.empty(0, np.complex128)


def _scalar_winding(rf: RatFun, step_hz=0.5, band_hz=100.0) -> int:
    ch = Channel.from_ratfun(rf, "det")
    loc = sweep(ch, FreqGrid.for_roots(ch.roots, band_hz, step_hz))
    return winding_number(loc)


@dataclass(frozen=True, eq=False)
class P2PAdmittanceForm:
    det: RatFun
    closed_form: RatFun
    census: np.ndarray          # right-half-plane poles of Z_s
    report: StabilityReport


def build_p2p_admittance_form(Zr, Zs, Ycable, rhp_pole_count: int | None = None,
                              tol_cancel: float = TOL_CANCEL) -> P2PAdmittanceForm:
    """Both converters in impedance form, cable as a two-port admittance.

    The determinant ``1 + Y_cable (Z_s + Z_r)`` carries the open-loop poles
    of ``Z_s``, which need not be stable.  Without a supplied pole count a
    nonzero census makes the verdict Indeterminate.
    """
    Zr, Zs, Yc = (x if isinstance(x, RatFun) else RatFun.const(x) for x in (Zr, Zs, Ycable))
    zero = RatFun.const(0.0)
    z_con = RatMatrix([[Zr, zero], [zero, Zs]])
    y_g = RatMatrix([[Yc, -Yc], [-Yc, Yc]])
    det = det_return_ratio(z_con, y_g, tol_cancel)
    closed = (RatSum.of(1.0) + RatSum.of(Yc) * (RatSum.of(Zs) + RatSum.of(Zr))).to_ratfun(tol_cancel)
    census = np.concatenate([split_rhp(Zr.poles)[0], split_rhp(Zs.poles)[0],
                             split_rhp(Yc.poles)[0]])
    w = _scalar_winding(det)
    naive = -w
    rep = StabilityReport("determinant", "dc", Verdict.INDETERMINATE, encirclements=w)
    rep.evidence["census"] = int(census.size)
    rep.evidence["naive_zero_count"] = int(naive)
    rep.evidence["naive_verdict"] = _verdict_from_z(naive).value
    if rhp_pole_count is None and census.size:
        rep.reason = f"{census.size} right-half-plane open-loop pole(s) and no pole count supplied"
    else:
        P = int(census.size if rhp_pole_count is None else rhp_pole_count)
        rep.rhp_open_loop_poles = P
        rep.rhp_closed_loop_zeros = naive + P
        rep.verdict = _verdict_from_z(naive + P)
    return P2PAdmittanceForm(det, closed, census, rep)
