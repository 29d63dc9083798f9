"""Shared containers for the posterior-estimation algorithms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..dynamics import ForceProfile, Trajectory


@dataclass
class ParticleSet:
    """Points in parameter space (raw units, one row per particle)."""

    particles: np.ndarray
    iteration: int = 0

    def __post_init__(self) -> None:
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        if self.particles.size == 0 or not np.isfinite(self.particles).all():
            raise ValueError("particles must be a non-empty finite (n, N) array")

    @property
    def n_particles(self) -> int:
        return self.particles.shape[0]

    @property
    def n_dims(self) -> int:
        return self.particles.shape[1]

    def mean(self) -> np.ndarray:
        return self.particles.mean(axis=0)


@dataclass(frozen=True)
class Episode:
    """One probing episode: the applied force profile and the observed response."""

    profile: ForceProfile
    trajectory: Trajectory

    def __post_init__(self) -> None:
        if self.profile.n_samples != self.trajectory.n_samples:
            raise ValueError("profile and trajectory lengths must match")


@dataclass
class GroundTruthSet:
    """Probing episodes with their train/test (or fold) split labels."""

    episodes: list[Episode]
    splits: list[str]

    def __post_init__(self) -> None:
        if len(self.episodes) != len(self.splits):
            raise ValueError("one split label per episode required")
        if not any(s == "train" for s in self.splits):
            raise ValueError("at least one train episode required")

    def subset(self, label: str) -> list[Episode]:
        return [e for e, s in zip(self.episodes, self.splits) if s == label]

    @property
    def train_episodes(self) -> list[Episode]:
        return self.subset("train")

    @property
    def test_episodes(self) -> list[Episode]:
        return self.subset("test")


@dataclass
class InferenceConfig:
    """Knobs shared by SVGD and the Monte Carlo baselines.

    ``kT`` is the Boltzmann temperature applied to the episode-count- and
    length-normalized loss; the normalization keeps a given kT meaningful
    across experiment sizes.  Particles are searched in log10 parameter
    space; bounds, priors and reported posteriors stay in raw units.
    """

    kT: float = 1.0
    step_size: float = 1.0          # epsilon multiplying the SVGD direction
    learning_rate: float = 0.05     # optimizer rate (log10 space)
    iterations: int = 300
    n_particles: int = 64
    fd_epsilon: float = 1e-2        # relative central-difference step
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    optimizer: str = "adam"         # "adam" | "sgd" (sgd = momentum disabled)
    seed: int = 0
    use_repulsion: bool = True      # kernel repulsion term of the update
    use_prior_term: bool = True     # prior gradient term of the update
    bandwidth_floor: float = 1e-8
    # Monte Carlo baselines (same particle count and iterations as SVGD)
    mcmh_proposal_scale: float = 0.05
    mcmh_burn_in: int = 0
    mcmh_thin: int = 1
    sgld_step: float = 1e-3
    sghmc_step: float = 2e-4
    sghmc_friction: float = 0.2
    # simulator settings used when evaluating the loss
    sim_dt: float = 1e-3
    gravity: float = 9.81
    divergence_penalty: float = 1e6

    def __post_init__(self) -> None:
        positive = {
            "kT": self.kT, "step_size": self.step_size,
            "learning_rate": self.learning_rate, "iterations": self.iterations,
            "n_particles": self.n_particles, "fd_epsilon": self.fd_epsilon,
            "sim_dt": self.sim_dt, "mcmh_proposal_scale": self.mcmh_proposal_scale,
            "sgld_step": self.sgld_step, "sghmc_step": self.sghmc_step,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.fd_epsilon < 0.1:
            raise ValueError("fd_epsilon must lie in (0, 0.1)")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")


@dataclass
class InferenceResult:
    """Converged particles plus per-iteration diagnostics.

    ``diagnostics`` rows are (iteration, mean_loss, min_loss, bandwidth);
    bandwidth is NaN for algorithms without a kernel.  ``samples`` holds the
    thinned post-burn-in chain history for the Monte Carlo samplers.
    """

    algorithm: str
    particles: ParticleSet
    diagnostics: np.ndarray
    samples: Optional[np.ndarray] = None
