"""Trajectory-matching loss and the Boltzmann log-posterior over parameters.

The loss for one parameter vector is the sum over training episodes of the
L2 norm of the stacked position residuals plus the L2 norm of the stacked
velocity residuals between the simulated and observed trajectories.  The
log-posterior divides the loss by kT times a size normalizer (total number
of observation samples across episodes) and adds the log-prior; Boltzmann
and Bayes normalization constants are dropped since only gradients and
differences are ever used.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..dynamics import TreeModel, rollout_arrays
from ..priors import ParameterPrior
from .gradients import fd_gradient_many
from .types import Episode, InferenceConfig

LN10 = np.log(10.0)


def loss_normalizer(episodes: Sequence[Episode]) -> float:
    """Total observation samples across episodes (the g x episode-count factor)."""
    return float(sum(ep.profile.n_samples for ep in episodes))


def loss_batch(
    thetas: np.ndarray,
    model: TreeModel,
    episodes: Sequence[Episode],
    dt: float = 1e-3,
    gravity: float = 9.81,
    divergence_penalty: float = 1e6,
) -> np.ndarray:
    """Loss for every row of thetas; diverged rollouts pay a large finite penalty."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if not episodes:
        raise ValueError("at least one episode required")
    total = np.zeros(thetas.shape[0])
    kp = thetas[:, 0::2]
    kd = thetas[:, 1::2]
    for ep in episodes:
        pos, vel, diverged = rollout_arrays(
            model, kp, kd, ep.profile, dt=dt, gravity=gravity
        )
        ok = ~diverged
        if ok.any():
            pos_res = (pos[ok] - ep.trajectory.pos).reshape(ok.sum(), -1)
            vel_res = (vel[ok] - ep.trajectory.vel).reshape(ok.sum(), -1)
            total[ok] += np.linalg.norm(pos_res, axis=1)
            total[ok] += np.linalg.norm(vel_res, axis=1)
        total[diverged] += divergence_penalty
    return total


def loss(
    theta: np.ndarray,
    model: TreeModel,
    train_episodes: Sequence[Episode],
    dt: float = 1e-3,
    gravity: float = 9.81,
    divergence_penalty: float = 1e6,
) -> float:
    """Position-plus-velocity trajectory deviation summed over train episodes."""
    return float(
        loss_batch(
            np.asarray(theta, dtype=float)[None, :],
            model,
            train_episodes,
            dt=dt,
            gravity=gravity,
            divergence_penalty=divergence_penalty,
        )[0]
    )


def log_posterior(
    theta: np.ndarray,
    model: TreeModel,
    episodes: Sequence[Episode],
    prior: ParameterPrior,
    cfg: InferenceConfig,
) -> float:
    """Unnormalized log-posterior -loss/(kT * normalizer) + log-prior."""
    value = -loss(
        theta, model, episodes,
        dt=cfg.sim_dt, gravity=cfg.gravity,
        divergence_penalty=cfg.divergence_penalty,
    ) / (cfg.kT * loss_normalizer(episodes))
    value += prior.log_density(np.asarray(theta, dtype=float))[0]
    return float(value)


class PosteriorTarget:
    """The log-posterior as seen by the samplers, over z = log10(theta).

    The search runs in log10 space because the gains span orders of
    magnitude; the transform is treated as a plain reparameterization (no
    Jacobian correction), with bounds, priors and reported posteriors kept in
    raw units.
    """

    def __init__(
        self,
        model: TreeModel,
        episodes: Sequence[Episode],
        prior: ParameterPrior,
        cfg: InferenceConfig,
    ):
        self.model = model
        self.episodes = list(episodes)
        self.prior = prior
        self.cfg = cfg
        self.normalizer = loss_normalizer(self.episodes)
        self._scale = cfg.kT * self.normalizer

    def theta_of(self, z: np.ndarray) -> np.ndarray:
        return 10.0**z

    def z_of(self, theta: np.ndarray) -> np.ndarray:
        return np.log10(theta)

    def loss_z(self, z: np.ndarray) -> np.ndarray:
        return loss_batch(
            self.theta_of(np.atleast_2d(z)),
            self.model,
            self.episodes,
            dt=self.cfg.sim_dt,
            gravity=self.cfg.gravity,
            divergence_penalty=self.cfg.divergence_penalty,
        )

    def log_lik_z(self, z: np.ndarray) -> np.ndarray:
        return -self.loss_z(z) / self._scale

    def log_posterior_z(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        value = self.log_lik_z(z)
        prior_value, _ = self.prior.log_density_batch(self.theta_of(z))
        return value + prior_value

    def loglik_grad_and_loss(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """FD gradient of the log-likelihood in z, plus raw center losses.

        All probe rollouts for all particles run through one batched call.
        """
        grad, centers = fd_gradient_many(
            self.log_lik_z, z, fd_epsilon=self.cfg.fd_epsilon
        )
        return grad, -centers * self._scale

    def prior_value_grad_z(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Analytic log-prior and its gradient chained through theta = 10^z."""
        z = np.atleast_2d(z)
        theta = self.theta_of(z)
        value, grad_theta = self.prior.log_density_batch(theta)
        return value, grad_theta * theta * LN10
