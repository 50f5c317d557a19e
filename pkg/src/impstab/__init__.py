"""Impedance-based small-signal stability analysis."""

from .criteria import (StabilityReport, Verdict, determinant_criterion, eig2, eigen_loci,
                       oracle_verdict, schur_loop_criterion)
from .frames import DomainTag, det_shift_identity, rotate_to_dq, rotate_to_sequence
from .logderiv import (FreqResponse, find_modes, log_derivative, refine_mode,
                       stability_from_loops)
from .models import (ControlMode, GridParams, VscParams, build_p2p_admittance_form,
                     build_p2p_dc, build_rl_grid, build_transfer_immittance, build_vsc,
                     build_vsc_3port, build_vsc_power_control, p2p_oracle)
from .ratfun import RatFun
from .schur import loop_impedance, schur_complement
from .smform import det_return_ratio, return_differences_from, smith_mcmillan
from .statespace import RatMatrix, StateSpace, close_loop, eigenvalues, transfer_matrix

__all__ = [
    "ControlMode", "DomainTag", "FreqResponse", "GridParams", "RatFun", "RatMatrix",
    "StabilityReport", "StateSpace", "Verdict", "VscParams",
    "build_p2p_admittance_form", "build_p2p_dc", "build_rl_grid", "build_transfer_immittance",
    "build_vsc", "build_vsc_3port", "build_vsc_power_control", "close_loop",
    "det_return_ratio", "det_shift_identity", "determinant_criterion", "eig2", "eigen_loci",
    "eigenvalues", "find_modes", "log_derivative", "loop_impedance", "oracle_verdict",
    "p2p_oracle", "refine_mode", "return_differences_from", "rotate_to_dq",
    "rotate_to_sequence", "schur_complement", "schur_loop_criterion", "smith_mcmillan",
    "stability_from_loops", "transfer_matrix",
]
