"""dq <-> sequence-domain mapping of frequency responses.

The rotation is the unitary ``T = [[1, j], [1, -j]] / sqrt(2)`` and the
sequence response at ``w`` is ``T H_dq(w - w0) T^H``.  Any unitary choice
gives the same determinants and eigenvalues, so verdicts do not depend on
it.  Sequence-domain objects exist only as sampled responses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SymmetryViolation

T = np.array([[1.0, 1j], [1.0, -1j]]) / np.sqrt(2.0)
T_INV = T.conj().T
OMEGA0_DEFAULT = 100.0 * np.pi


@dataclass(frozen=True)
class DomainTag:
    kind: str
    omega0: float = OMEGA0_DEFAULT

    def __post_init__(self):
        if self.kind not in ("dq", "sequence"):
            raise ValueError(f"unknown domain {self.kind!r}")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")

    @property
    def center(self) -> float:
        """Frequency (rad/s) about which responses are mirrored."""
        return 0.0 if self.kind == "dq" else self.omega0


def rotate_to_sequence(H):
    """``T H T^H`` on the trailing 2x2 axes (no frequency shift)."""
    return T @ np.asarray(H, dtype=np.complex128) @ T_INV


def rotate_to_dq(H):
    return T_INV @ np.asarray(H, dtype=np.complex128) @ T


def dq_to_sequence_response(h_dq, omega, omega0=OMEGA0_DEFAULT):
    """Sequence response at ``omega`` from a dq response callable ``h_dq(s)``."""
    omega = np.asarray(omega, dtype=np.float64)
    return rotate_to_sequence(h_dq(1j * (omega - omega0)))


def sequence_to_dq_response(h_pn, omega, omega0=OMEGA0_DEFAULT):
    """dq response at ``omega`` from a sequence response callable ``h_pn(s)``."""
    omega = np.asarray(omega, dtype=np.float64)
    return rotate_to_dq(h_pn(1j * (omega + omega0)))


def mirror_index(omega, center, rtol=1e-9):
    """For each sample, the index of the sample mirrored about ``center`` (or -1)."""
    omega = np.asarray(omega, dtype=np.float64)
    target = 2.0 * center - omega
    idx = np.searchsorted(omega, target)
    idx = np.clip(idx, 0, omega.size - 1)
    best = idx.copy()
    for shift in (-1, 0):
        cand = np.clip(idx + shift, 0, omega.size - 1)
        closer = np.abs(omega[cand] - target) < np.abs(omega[best] - target)
        best = np.where(closer, cand, best)
    tol = rtol * np.maximum(1.0, np.abs(omega))
    return np.where(np.abs(omega[best] - target) <= tol, best, -1)


def symmetry_violation(omega, H, tag: DomainTag) -> float:
    """Largest relative deviation from the domain's mirror symmetry.

    dq: ``H(-w) = conj H(w)``.  Sequence: ``H11(w0-x) = conj H22(w0+x)``
    and ``H12(w0-x) = conj H21(w0+x)``.  Scalar channels (shape ``(N,)``)
    are checked for ``h(-w) = conj h(w)`` about the domain centre.
    """
    H = np.asarray(H, dtype=np.complex128)
    mi = mirror_index(omega, tag.center)
    ok = mi >= 0
    if not np.any(ok):
        raise ValueError("grid has no mirrored sample pairs")
    here, there = H[ok], H[mi[ok]]
    if H.ndim == 1 or tag.kind == "dq":
        expect = np.conj(there)
    else:
        expect = np.conj(there[..., ::-1, ::-1])
    scale = max(np.max(np.abs(H)), 1e-300)
    return float(np.max(np.abs(here - expect)) / scale)


@dataclass(frozen=True)
class SymmetryReport:
    kind: str
    max_violation: float
    pairs: int


def verify_symmetries(omega, H, tag: DomainTag, tol: float = 1e-6) -> SymmetryReport:
    """Check mirror symmetry; raise :class:`SymmetryViolation` above ``tol``."""
    v = symmetry_violation(omega, H, tag)
    pairs = int(np.count_nonzero(mirror_index(omega, tag.center) >= 0))
    if v > tol:
        raise SymmetryViolation(f"{tag.kind} symmetry violated by {v:.3g} (tol {tol:g})")
    return SymmetryReport(tag.kind, v, pairs)


def det_shift_identity(zg, yc, omega, omega0=OMEGA0_DEFAULT) -> float:
    """Max relative gap between ``det(I+R_pn)(w+w0)`` and ``det(I+R_dq)(w)``.

    ``zg`` and ``yc`` are dq response callables of ``s``.
    """
    omega = np.asarray(omega, dtype=np.float64)
    s = 1j * omega
    I2 = np.eye(2)
    d_dq = np.linalg.det(I2 + zg(s) @ yc(s))
    w_pn = omega + omega0
    z_pn = dq_to_sequence_response(zg, w_pn, omega0)
    y_pn = dq_to_sequence_response(yc, w_pn, omega0)
    d_pn = np.linalg.det(I2 + z_pn @ y_pn)
    return float(np.max(np.abs(d_pn - d_dq) / np.maximum(np.abs(d_dq), 1e-300)))


def dq_to_sequence_frequency(omega_dq, omega0=OMEGA0_DEFAULT):
    return np.asarray(omega_dq) + omega0


def sequence_to_dq_frequency(omega_pn, omega0=OMEGA0_DEFAULT):
    return np.asarray(omega_pn) - omega0
