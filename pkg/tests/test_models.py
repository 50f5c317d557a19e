import numpy as np
import pytest

from impstab.criteria import Verdict, schur_loop_criterion
from impstab.errors import OperatingPointInfeasible, PortNotAvailable
from impstab.models import (ControlMode, GridParams, VscParams, build_p2p_admittance_form,
                            build_p2p_dc, build_rl_grid, build_transfer_immittance, build_vsc,
                            build_vsc_3port, build_vsc_power_control, p2p_oracle, realize,
                            rl_grid_admittance_ss, rl_grid_impedance_ss, swap_dc_port)
from impstab.ratfun import RatFun
from impstab.schur import loop_impedance
from impstab.statespace import RatMatrix, close_loop, eigenvalues, transfer_matrix

from conftest import assert_same_roots

rf = RatFun.from_roots
S = 1j * np.linspace(-900.0, 900.0, 41) + 0.7

# grid inductances of the default scenario on either side of the boundary (2.04 mH)
L_STABLE, L_UNSTABLE = 1.0e-3, 2.2e-3


def _max_real(L_g, vsc=None):
    vsc = vsc or build_vsc()
    return eigenvalues(close_loop(rl_grid_impedance_ss(GridParams(L_g=L_g)), vsc).A).real.max()


# ---------------------------------------------------------------------------
# converter
# ---------------------------------------------------------------------------

def test_default_vsc_is_open_loop_stable_with_eight_states():
    ss = build_vsc()
    assert (ss.n, ss.m, ss.p) == (8, 2, 2)
    assert ss.open_loop_stable()


def test_default_stable_on_stiff_grid():
    # the stiffest grid the impedance realization admits: resistance only
    assert _max_real(0.0) < 0
    assert _max_real(1e-6) < 0


def test_default_crosses_boundary_between_sweep_ends():
    assert _max_real(L_STABLE) < 0
    assert _max_real(L_UNSTABLE) > 0


def test_admittance_entries_share_degree_eight_denominator():
    yc = transfer_matrix(build_vsc())
    assert yc.common_den.degree <= 8
    np.testing.assert_allclose(yc(S), build_vsc()(S), rtol=1e-8, atol=1e-12)


def test_admittance_is_real_coefficient():
    yc = transfer_matrix(build_vsc())
    w = np.linspace(1.0, 800.0, 9)
    np.testing.assert_allclose(yc(-1j * w), np.conj(yc(1j * w)), rtol=1e-10, atol=1e-14)


def test_infeasible_operating_point_raises():
    with pytest.raises(OperatingPointInfeasible):
        build_vsc(VscParams(P0=5e6))


def test_invalid_parameters_raise():
    with pytest.raises(ValueError):
        VscParams(L_f=0.0)
    with pytest.raises(ValueError):
        GridParams(L_g=0.0, R_g=0.0)


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

def test_rl_grid_matrix():
    g = GridParams(L_g=2e-3, R_g=0.1)
    Z = build_rl_grid(g)(S)
    x = g.omega0 * g.L_g
    np.testing.assert_allclose(Z[:, 0, 0], g.R_g + S * g.L_g)
    np.testing.assert_allclose(Z[:, 0, 1], -x)
    np.testing.assert_allclose(Z[:, 1, 0], x)


def test_rl_grid_realizations_agree():
    g = GridParams(L_g=1.5e-3, R_g=0.2)
    Z = build_rl_grid(g)(S)
    np.testing.assert_allclose(rl_grid_impedance_ss(g)(S), Z, rtol=1e-12)
    Y = rl_grid_admittance_ss(g)
    assert Y.n == 2
    np.testing.assert_allclose(Y(S) @ Z, np.broadcast_to(np.eye(2), Z.shape), atol=1e-9)


def test_admittance_realization_needs_inductance():
    with pytest.raises(ValueError):
        rl_grid_admittance_ss(GridParams(L_g=0.0, R_g=0.5))


# ---------------------------------------------------------------------------
# three-port immittances
# ---------------------------------------------------------------------------

def test_three_port_ac_block_is_the_converter_admittance():
    t = build_transfer_immittance(build_vsc_3port(), ControlMode.DC_VOLTAGE)
    assert t.mode is ControlMode.DC_VOLTAGE
    np.testing.assert_allclose(t(S)[:, :2, :2], build_vsc()(S), rtol=1e-7, atol=1e-12)
    assert t.units[2][2] == "Ohm"


def test_swap_dc_port_is_an_involution():
    m = transfer_matrix(build_vsc_3port())
    back = swap_dc_port(swap_dc_port(m))
    np.testing.assert_allclose(back(S), m(S), rtol=1e-7, atol=1e-12)


def test_dc_voltage_model_in_power_layout():
    t = build_transfer_immittance(build_vsc_3port(), "PowerControl")
    M = transfer_matrix(build_vsc_3port())(S)
    # direct partial inversion of the sampled matrix
    ref = np.empty_like(M)
    ref[:, :2, :2] = M[:, :2, :2] - M[:, :2, 2:] @ M[:, 2:, :2] / M[:, 2:, 2:]
    ref[:, :2, 2] = M[:, :2, 2] / M[:, 2, 2, None]
    ref[:, 2, :2] = -M[:, 2, :2] / M[:, 2, 2, None]
    ref[:, 2, 2] = 1.0 / M[:, 2, 2]
    np.testing.assert_allclose(t(S), ref, rtol=1e-6, atol=1e-12)


def test_power_control_model():
    ss = build_vsc_power_control()
    assert (ss.n, ss.m, ss.p) == (7, 3, 3)
    assert ss.open_loop_stable()
    t = build_transfer_immittance(ss, ControlMode.POWER)
    assert t.inputs == ("v_d", "v_q", "v_dc") and t.outputs == ("i_d", "i_q", "i_0")
    ref = ss(S)
    # entries vanish near s = 0, so compare against each entry's own scale
    scale = np.abs(ref).max(axis=0)
    assert np.all(np.abs(t(S) - ref) <= 1e-8 * scale + 1e-7 * np.abs(ref))


def test_power_control_cannot_be_re_partitioned_to_dc_voltage():
    with pytest.raises(PortNotAvailable):
        build_transfer_immittance(build_vsc_power_control(), ControlMode.DC_VOLTAGE)


def test_two_port_model_refused_as_three_port():
    with pytest.raises(PortNotAvailable):
        build_transfer_immittance(build_vsc(), ControlMode.POWER)


# ---------------------------------------------------------------------------
# loop impedance structure on the default scenario
# ---------------------------------------------------------------------------

def _loop(L_g, frame=1):
    zc = transfer_matrix(build_vsc()).inv()
    return loop_impedance(build_rl_grid(GridParams(L_g=L_g)), zc, frame), zc


def test_unstable_point_loop_has_rhp_zeros_and_poles():
    ld, _ = _loop(L_UNSTABLE)
    modes = eigenvalues(close_loop(rl_grid_impedance_ss(GridParams(L_g=L_UNSTABLE)), build_vsc()).A)
    unstable = modes[modes.real > 0]
    assert unstable.size == 2 and np.all(np.abs(unstable.imag) > 2 * np.pi)
    assert ld.rhp_poles.size == 2
    rhp_zeros = ld.loop_imp.zeros[ld.loop_imp.zeros.real > 0]
    assert_same_roots(rhp_zeros, unstable, rtol=1e-6)


def test_stable_point_loop_carries_rhp_poles():
    ld, zc = _loop(L_STABLE)
    assert ld.rhp_poles.size == 2
    assert not np.any(ld.loop_imp.zeros.real > 0)
    zg = build_rl_grid(GridParams(L_g=L_STABLE))
    with_census = schur_loop_criterion(zg, zc, frame=1)
    naive = schur_loop_criterion(zg, zc, frame=1, use_census=False)
    # two anticlockwise turns that only the pole census explains
    assert with_census.encirclements == 2
    assert with_census.verdict is Verdict.STABLE
    assert naive.verdict is Verdict.INDETERMINATE
    assert with_census.caveats


def test_loop_split_is_additive():
    ld, _ = _loop(L_UNSTABLE)
    np.testing.assert_allclose(ld.loop_imp(S), ld.zc_eq(S) + ld.zg_eq(S), rtol=1e-9, atol=1e-12)


# ---------------------------------------------------------------------------
# DC transmission block systems
# ---------------------------------------------------------------------------

ZR = rf([-3.0], [-1.0, -5.0], 2.0)
YS = rf([-2.0], [-4.0], 0.7)
ZCABLE = rf([], [-10.0], 3.0)


def test_realize_round_trip():
    f = rf([-3.0, -7.0], [-1.0, -2.0, -9.0], 4.0)
    np.testing.assert_allclose(realize(f)(S)[:, 0, 0], f(S), rtol=1e-10)
    with pytest.raises(ValueError):
        realize(rf([-1.0, -2.0], [-3.0]))


def test_back_to_back_reduction():
    p = build_p2p_dc(ZR, YS, 0.0)
    np.testing.assert_allclose(p.det(S), 1 + YS(S) * ZR(S), rtol=1e-9)


def test_cable_in_series_with_sending_end():
    p = build_p2p_dc(ZR, YS, ZCABLE)
    np.testing.assert_allclose(p.det(S), p.closed_form(S), rtol=1e-9)
    np.testing.assert_allclose(p.det(S), 1 + YS(S) * (ZCABLE(S) + ZR(S)), rtol=1e-9)


def test_p2p_zeros_match_oracle():
    p = build_p2p_dc(ZR, YS, ZCABLE)
    assert_same_roots(p.det.zeros, p2p_oracle(ZR, YS, ZCABLE), rtol=1e-6)
    # a gain large enough to destabilise the link
    ys = rf([2.0], [-4.0], 5.0)
    p = build_p2p_dc(ZR, ys, ZCABLE)
    cl = p2p_oracle(ZR, ys, ZCABLE)
    assert_same_roots(p.det.zeros, cl, rtol=1e-6)
    assert cl.real.max() > 0


def test_admittance_form_identity():
    ycable = rf([], [-20.0], 8.0)
    f = build_p2p_admittance_form(ZR, rf([-1.0], [-6.0], 2.0), ycable)
    zs = rf([-1.0], [-6.0], 2.0)
    np.testing.assert_allclose(f.det(S), f.closed_form(S), rtol=1e-9)
    np.testing.assert_allclose(f.det(S), 1 + ycable(S) * (zs(S) + ZR(S)), rtol=1e-9)
    assert f.report.verdict is Verdict.STABLE


def test_zero_cable_admittance_decouples():
    f = build_p2p_admittance_form(ZR, YS, 0.0)
    np.testing.assert_allclose(f.det(S), 1.0, atol=1e-12)


def test_admittance_form_hazard_needs_census():
    # Z_s has a right-half-plane pole; the closed loop 1 + (4/(s-1) + 1)/(s+1)
    # has zeros at the roots of s^2 + s + 4, which are stable
    zs, zr, ycable = rf([], [1.0], 4.0), RatFun.const(1.0), rf([], [-1.0])
    f = build_p2p_admittance_form(zr, zs, ycable)
    assert f.census.size == 1
    assert f.report.verdict is Verdict.INDETERMINATE
    # one anticlockwise turn read without the census is an impossible count
    assert f.report.encirclements == 1
    assert f.report.evidence["naive_zero_count"] == -1
    z = f.det.zeros
    assert np.all(z.real < 0)
    counted = build_p2p_admittance_form(zr, zs, ycable, rhp_pole_count=1)
    assert counted.report.verdict is Verdict.STABLE
    assert counted.report.rhp_closed_loop_zeros == 0
