"""Schur complements of 2x2 rational matrices and loop impedances.

Frame indices are abstract (1 or 2).  Their binding to d/q or p/n is the
caller's business; see :mod:`impstab.frames`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SingularEliminationBlock
from .ratfun import TOL_CANCEL, RatFun, RatSum, split_rhp
from .statespace import RatMatrix


def _order(frame):
    if frame not in (1, 2):
        raise ValueError(f"frame must be 1 or 2, got {frame!r}")
    return (0, 1) if frame == 1 else (1, 0)


def _inv_sum(rf: RatFun) -> RatSum:
    if rf.is_zero:
        raise SingularEliminationBlock("eliminated block is identically zero")
    return RatSum([(1.0 / rf.gain, rf.poles, rf.zeros)], rf.real_coeffs)


def schur_complement(m: RatMatrix, keep: int = 1, tol_cancel: float = TOL_CANCEL) -> RatFun:
    """``m11 - m12 m21 / m22`` for ``keep=1``; the mirrored form for ``keep=2``."""
    if m.shape != (2, 2):
        raise DimensionMismatch(f"expected 2x2, got {m.shape}")
    a, b = _order(keep)
    S = m.sums()
    inv = _inv_sum(m[b, b])
    return (S[a][a] - S[a][b] * S[b][a] * inv).to_ratfun(tol_cancel)


@dataclass(frozen=True)
class LoopDecomposition:
    """Loop impedance of one frame and its split into converter and grid sides."""

    loop_imp: RatFun   # S_Z^f
    zc_eq: RatFun      # converter-side equivalent Z_c^f
    zg_eq: RatFun      # grid-side equivalent Z_g^f
    r1d: RatFun        # Z_g^f / Z_c^f
    frame: int
    rhp_poles: np.ndarray
    marginal_poles: np.ndarray

    @property
    def one_plus_r1d(self) -> RatFun:
        """``1 + Z_g^f/Z_c^f``, which equals ``S_Z^f / Z_c^f``."""
        return (RatSum.of(1.0) + RatSum.of(self.r1d)).to_ratfun()


def loop_impedance(zg: RatMatrix, zc: RatMatrix, frame: int = 1,
                   tol_cancel: float = TOL_CANCEL) -> LoopDecomposition:
    """Loop impedance ``S_Z^f`` of ``Z_g + Z_c`` with the other frame folded in."""
    if zg.shape != (2, 2) or zc.shape != (2, 2):
        raise DimensionMismatch(f"expected 2x2 matrices, got {zg.shape} and {zc.shape}")
    a, b = _order(frame)
    G, C = zg.sums(), zc.sums()
    block = (G[b][b] + C[b][b]).to_ratfun(tol_cancel)
    inv = _inv_sum(block)
    coupling = (G[b][a] + C[b][a]) * inv
    zc_eq = (C[a][a] - C[a][b] * coupling).to_ratfun(tol_cancel)
    zg_eq = (G[a][a] - G[a][b] * coupling).to_ratfun(tol_cancel)
    loop = (G[a][a] + C[a][a] - (G[a][b] + C[a][b]) * coupling).to_ratfun(tol_cancel)
    r1d = (RatSum.of(zg_eq) * _inv_sum(zc_eq)).to_ratfun(tol_cancel)
    rhp, marginal = split_rhp(loop.poles)
    return LoopDecomposition(loop, zc_eq, zg_eq, r1d, frame, rhp, marginal)


def schur_complement_values(H, keep: int = 1) -> np.ndarray:
    """Pointwise Schur complement of sampled 2x2 matrices, shape ``(..., 2, 2)``."""
    H = np.asarray(H, dtype=np.complex128)
    if H.shape[-2:] != (2, 2):
        raise DimensionMismatch(f"expected trailing 2x2, got {H.shape}")
    a, b = _order(keep)
    return H[..., a, a] - H[..., a, b] * H[..., b, a] / H[..., b, b]
