"""Inelastic Kac equation: McKean-tree sampling, Wild-series solver, stable limits."""

__version__ = "0.1.0"

from .model import ModelParams, alpha_of, kernel_cp, kernel_sp, law_from_config, symmetrize
from .stable import StableSpec, a0_from_c0, c0_from_a0, sample_stable, stable_cf
from .wild import CfGrid, SolverConfig, fixed_point_residual, p_wild_convolution, solve_cf
