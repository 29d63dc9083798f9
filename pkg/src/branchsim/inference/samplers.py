"""Monte Carlo baselines: Metropolis-Hastings, SGLD and SGHMC.

All three run n parallel chains (one per particle, matching the SVGD particle
count) from the same uniform-in-box initialization, reuse the identical
log-posterior and finite-difference machinery, and report raw-unit samples.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable, Optional, Sequence

import numpy as np

from ..dynamics import TreeModel
from ..priors import ParameterPrior
from .losses import PosteriorTarget
from .svgd import init_particles_z
from .types import Episode, InferenceConfig, InferenceResult, ParticleSet


# --- generic cores (used directly on analytic targets in tests) ---------------


def run_mcmh_generic(
    logp_batch: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    iterations: int,
    proposal_scale: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Gaussian random-walk Metropolis on n parallel chains.

    Returns (final states, full history (iterations, n, N), acceptance rate).
    """
    x = np.array(np.atleast_2d(x0), dtype=float)
    n, dim = x.shape
    logp = np.asarray(logp_batch(x), dtype=float)
    history = np.empty((iterations, n, dim))
    accepted = 0
    for it in range(iterations):
        proposal = x + proposal_scale * rng.standard_normal((n, dim))
        logp_new = np.asarray(logp_batch(proposal), dtype=float)
        log_u = np.log(rng.uniform(size=n))
        accept = log_u < (logp_new - logp)
        x = np.where(accept[:, None], proposal, x)
        logp = np.where(accept, logp_new, logp)
        accepted += int(accept.sum())
        history[it] = x
    return x, history, accepted / (iterations * n)


def run_sgld_generic(
    grad_batch: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    iterations: int,
    step: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Langevin dynamics x += (eps/2) grad log p + sqrt(eps) * N(0, I)."""
    x = np.array(np.atleast_2d(x0), dtype=float)
    history = np.empty((iterations,) + x.shape)
    for it in range(iterations):
        grad = np.asarray(grad_batch(x), dtype=float)
        x = x + 0.5 * step * grad + math.sqrt(step) * rng.standard_normal(x.shape)
        history[it] = x
    return x, history


def run_sghmc_generic(
    grad_batch: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    iterations: int,
    step: float,
    friction: float,
    rng: np.random.Generator,
    with_noise: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Stochastic-gradient HMC with friction; zero friction and noise gives
    the symplectic leapfrog-style update used by the Hamiltonian check."""
    x = np.array(np.atleast_2d(x0), dtype=float)
    v = np.zeros_like(x)
    noise_std = math.sqrt(2.0 * friction * step) if with_noise else 0.0
    history = np.empty((iterations,) + x.shape)
    for it in range(iterations):
        grad = np.asarray(grad_batch(x), dtype=float)
        v = (1.0 - friction) * v + step * grad
        if noise_std > 0:
            v = v + noise_std * rng.standard_normal(x.shape)
        x = x + v
        history[it] = x
    return x, history


# --- simulator-facing wrappers -------------------------------------------------


def _clamp_to_box(z: np.ndarray, z_lo: np.ndarray, z_hi: np.ndarray) -> np.ndarray:
    bad = ~np.isfinite(z)
    if bad.any():
        warnings.warn(
            f"clamping {int(bad.sum())} divergent sample component(s) into the box"
        )
        mid = 0.5 * (z_lo + z_hi)
        z = z.copy()
        nan_mask = np.isnan(z)
        z[nan_mask] = np.broadcast_to(mid, z.shape)[nan_mask]
        z = np.clip(z, z_lo, z_hi)
    return z


def _mc_diagnostics(it: int, losses: np.ndarray) -> tuple:
    return (it, losses.mean(), losses.min(), math.nan)


def run_mcmh(
    model: TreeModel,
    episodes: Sequence[Episode],
    prior: ParameterPrior,
    cfg: InferenceConfig,
) -> InferenceResult:
    """Random-walk Metropolis over log10 parameters with the smooth box prior.

    ``samples`` holds the thinned post-burn-in chain history in raw units.
    """
    target = PosteriorTarget(model, episodes, prior, cfg)
    rng = np.random.default_rng(cfg.seed)
    z = init_particles_z(prior, cfg, rng)
    n, dim = z.shape
    losses = target.loss_z(z)
    prior_vals, _ = target.prior_value_grad_z(z)
    logp = -losses / (cfg.kT * target.normalizer) + prior_vals
    diagnostics = np.empty((cfg.iterations, 4))
    history = np.empty((cfg.iterations, n, dim))
    for it in range(cfg.iterations):
        proposal = z + cfg.mcmh_proposal_scale * rng.standard_normal((n, dim))
        losses_new = target.loss_z(proposal)
        prior_new, _ = target.prior_value_grad_z(proposal)
        logp_new = -losses_new / (cfg.kT * target.normalizer) + prior_new
        accept = np.log(rng.uniform(size=n)) < (logp_new - logp)
        z = np.where(accept[:, None], proposal, z)
        logp = np.where(accept, logp_new, logp)
        losses = np.where(accept, losses_new, losses)
        history[it] = z
        diagnostics[it] = _mc_diagnostics(it, losses)
    kept = history[cfg.mcmh_burn_in:: cfg.mcmh_thin]
    return InferenceResult(
        algorithm="mcmh",
        particles=ParticleSet(10.0**z, iteration=cfg.iterations),
        diagnostics=diagnostics,
        samples=10.0 ** kept.reshape(-1, dim),
    )


def _run_gradient_sampler(
    model: TreeModel,
    episodes: Sequence[Episode],
    prior: ParameterPrior,
    cfg: InferenceConfig,
    algorithm: str,
) -> InferenceResult:
    target = PosteriorTarget(model, episodes, prior, cfg)
    rng = np.random.default_rng(cfg.seed)
    z = init_particles_z(prior, cfg, rng)
    z_lo = np.log10(prior.box.lower)
    z_hi = np.log10(prior.box.upper)
    v = np.zeros_like(z)
    diagnostics = np.empty((cfg.iterations, 4))
    for it in range(cfg.iterations):
        grad, losses = target.loglik_grad_and_loss(z)
        _, prior_grad = target.prior_value_grad_z(z)
        grad = grad + prior_grad
        if algorithm == "sgld":
            z = (
                z
                + 0.5 * cfg.sgld_step * grad
                + math.sqrt(cfg.sgld_step) * rng.standard_normal(z.shape)
            )
        else:  # sghmc
            v = (1.0 - cfg.sghmc_friction) * v + cfg.sghmc_step * grad
            v = v + math.sqrt(
                2.0 * cfg.sghmc_friction * cfg.sghmc_step
            ) * rng.standard_normal(z.shape)
            z = z + v
        z = _clamp_to_box(z, z_lo, z_hi)
        diagnostics[it] = _mc_diagnostics(it, losses)
    return InferenceResult(
        algorithm=algorithm,
        particles=ParticleSet(10.0**z, iteration=cfg.iterations),
        diagnostics=diagnostics,
    )


def run_sgld(
    model: TreeModel,
    episodes: Sequence[Episode],
    prior: ParameterPrior,
    cfg: InferenceConfig,
) -> InferenceResult:
    """Stochastic gradient Langevin dynamics with FD posterior gradients."""
    return _run_gradient_sampler(model, episodes, prior, cfg, "sgld")


def run_sghmc(
    model: TreeModel,
    episodes: Sequence[Episode],
    prior: ParameterPrior,
    cfg: InferenceConfig,
) -> InferenceResult:
    """Stochastic gradient Hamiltonian Monte Carlo with friction and noise."""
    return _run_gradient_sampler(model, episodes, prior, cfg, "sghmc")
