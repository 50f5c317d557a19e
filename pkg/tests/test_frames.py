import numpy as np
import pytest

from impstab.errors import SymmetryViolation
from impstab.frames import (DomainTag, det_shift_identity, dq_to_sequence_frequency,
                            dq_to_sequence_response, rotate_to_dq, rotate_to_sequence,
                            sequence_to_dq_frequency, sequence_to_dq_response,
                            symmetry_violation, verify_symmetries)
from impstab.models import GridParams, build_rl_grid, build_vsc
from impstab.statespace import transfer_matrix

from conftest import random_pair

W0 = 100 * np.pi


def test_identity_is_preserved():
    w = np.linspace(-500, 500, 11)
    H = dq_to_sequence_response(lambda s: np.broadcast_to(np.eye(2), np.shape(s) + (2, 2)), w)
    np.testing.assert_allclose(H, np.broadcast_to(np.eye(2), H.shape), atol=1e-15)


def test_pure_coupling_is_diagonalised():
    x = 3.0
    Hpn = rotate_to_sequence(np.array([[0, -x], [x, 0]]))
    np.testing.assert_allclose(Hpn, np.diag([1j * x, -1j * x]), atol=1e-14)


def test_round_trip(rng):
    for _ in range(20):
        H = rng.normal(size=(50, 2, 2)) + 1j * rng.normal(size=(50, 2, 2))
        np.testing.assert_allclose(rotate_to_dq(rotate_to_sequence(H)), H, rtol=0, atol=1e-12 * np.abs(H).max())
        np.testing.assert_allclose(rotate_to_sequence(rotate_to_dq(H)), H, rtol=0, atol=1e-12 * np.abs(H).max())


def test_response_round_trip(rng):
    zg, _ = random_pair(rng)
    tm = transfer_matrix(zg)
    w = np.linspace(-400, 400, 41)
    back = sequence_to_dq_response(lambda s: rotate_to_sequence(tm(s - 1j * W0)), w)
    np.testing.assert_allclose(back, tm(1j * w), atol=1e-12 * np.abs(tm(1j * w)).max())


def test_frequency_maps():
    assert dq_to_sequence_frequency(0.0) == pytest.approx(W0)
    assert sequence_to_dq_frequency(dq_to_sequence_frequency(12.0)) == pytest.approx(12.0)


class TestSymmetry:
    def test_real_dq_channel(self, rng):
        zg, _ = random_pair(rng)
        w = np.linspace(-300, 300, 61)
        H = transfer_matrix(zg)(1j * w)
        assert symmetry_violation(w, H, DomainTag("dq")) < 1e-12

    def test_sequence_pair_is_mirrored(self, rng):
        zg, _ = random_pair(rng)
        tm = transfer_matrix(zg)
        w = W0 + np.linspace(-300, 300, 61)
        H = dq_to_sequence_response(tm, w)
        rep = verify_symmetries(w, H, DomainTag("sequence"), tol=1e-9)
        assert rep.pairs == 61

    def test_corruption_detected(self, rng):
        zg, _ = random_pair(rng)
        w = np.linspace(-300, 300, 61)
        H = transfer_matrix(zg)(1j * w).copy()
        H[7, 0, 1] += 0.1 * np.abs(H).max()
        with pytest.raises(SymmetryViolation):
            verify_symmetries(w, H, DomainTag("dq"))

    def test_bad_tag(self):
        with pytest.raises(ValueError):
            DomainTag("abc")


class TestDetShift:
    def test_identity_return_ratio(self):
        zero = lambda s: np.zeros(np.shape(s) + (2, 2), complex)
        eye = lambda s: np.broadcast_to(np.eye(2), np.shape(s) + (2, 2))
        assert det_shift_identity(zero, eye, np.linspace(-100, 100, 21)) == 0.0

    def test_random_pairs(self, rng):
        for _ in range(10):
            zg, yc = random_pair(rng)
            dev = det_shift_identity(transfer_matrix(zg), transfer_matrix(yc), np.linspace(-600, 600, 301))
            assert dev < 1e-7

    def test_vsc(self):
        yc = transfer_matrix(build_vsc())
        zg = build_rl_grid(GridParams())
        assert det_shift_identity(zg, yc, 2 * np.pi * np.linspace(-100, 100, 401)) < 1e-6
