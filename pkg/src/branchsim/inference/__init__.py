"""Posterior estimation over branch spring parameters."""

from .gradients import fd_gradient, fd_gradient_many
from .kernels import RbfKernelResult, rbf_kernel
from .losses import PosteriorTarget, log_posterior, loss, loss_batch, loss_normalizer
from .samplers import (
    run_mcmh,
    run_mcmh_generic,
    run_sghmc,
    run_sghmc_generic,
    run_sgld,
    run_sgld_generic,
)
from .svgd import init_particles_z, run_svgd, run_svgd_generic, svgd_direction, svgd_step
from .types import (
    Episode,
    GroundTruthSet,
    InferenceConfig,
    InferenceResult,
    ParticleSet,
)

__all__ = [
    "Episode",
    "GroundTruthSet",
    "InferenceConfig",
    "InferenceResult",
    "ParticleSet",
    "PosteriorTarget",
    "RbfKernelResult",
    "fd_gradient",
    "fd_gradient_many",
    "init_particles_z",
    "log_posterior",
    "loss",
    "loss_batch",
    "loss_normalizer",
    "rbf_kernel",
    "run_mcmh",
    "run_mcmh_generic",
    "run_sghmc",
    "run_sghmc_generic",
    "run_sgld",
    "run_sgld_generic",
    "run_svgd",
    "run_svgd_generic",
    "svgd_direction",
    "svgd_step",
]
