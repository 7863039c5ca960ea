"""Discriminant dynamic mode decomposition.

Fits per-episode DMD eigenvalue sets to a labeled collection of time series,
trading reconstruction error against kernel Fisher separability of the
dynamic-mode subspaces.
"""

from modekit._backend import NAME as KERNEL_BACKEND
from modekit.dmd import DmdFit, Episode, exact_dmd, f_dmd, f_dmd_grad, reconstruct, varpro_modes
from modekit.dms_kernel import DMSBasis, dms_basis, k_dms, k_dms_grad, proj_distance
from modekit.kfd import ClassGram, assemble_gram, f_kfd, f_kfd_grad, q1, q2
from modekit.optimizer import FitConfig, FitResult, fit, fit_optimized_dmd, gradient, objective

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "ClassGram",
    "DMSBasis",
    "DmdFit",
    "Episode",
    "FitConfig",
    "FitResult",
    "assemble_gram",
    "dms_basis",
    "exact_dmd",
    "f_dmd",
    "f_dmd_grad",
    "f_kfd",
    "f_kfd_grad",
    "fit",
    "fit_optimized_dmd",
    "gradient",
    "k_dms",
    "k_dms_grad",
    "objective",
    "proj_distance",
    "q1",
    "q2",
    "reconstruct",
    "varpro_modes",
]
