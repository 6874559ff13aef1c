"""Joint super-resolution of image sequences and inter-frame motion.

The high-resolution frames follow a backward recursion in which each frame
is the spline-warped next frame plus a residual, and the last frame is sparse
in a wavelet dictionary.  Residuals, coefficients and motion are estimated
from blurred, decimated observations by alternating convex ADMM subproblems
with a backtracked motion step.
"""

from .adjoint import SequentialModel, grad_full, grad_motion_dataterm, synthesize_states
from .admm import solve_convex, solve_motion, solve_step1
from .core import CoefVec, ConfigError, Grid, ImageSeq, MotionSeq, NoiseSeq, SolverConfig
from .kalman import build_dense_model, smooth_map
from .metrics import cc, mbae, mepe, psnr
from .outer import eval_J, lanczos_upscale, super_resolve
from .synthetic import degrade, make_synthetic

__version__ = "0.1.0"

__all__ = [
    "CoefVec",
    "ConfigError",
    "Grid",
    "ImageSeq",
    "MotionSeq",
    "NoiseSeq",
    "SequentialModel",
    "SolverConfig",
    "build_dense_model",
    "cc",
    "degrade",
    "eval_J",
    "grad_full",
    "grad_motion_dataterm",
    "lanczos_upscale",
    "make_synthetic",
    "mbae",
    "mepe",
    "psnr",
    "smooth_map",
    "solve_convex",
    "solve_motion",
    "solve_step1",
    "super_resolve",
    "synthesize_states",
]
