"""Predictive trajectory distributions and their quality metrics.

Converged particles are turned into per-timestep confidence bands by kernel
density estimation over the predicted deflections (Gaussian kernels, Scott's
bandwidth), and scored against held-out ground truth by the fraction of true
points falling outside the band together with the band width.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr

from .dynamics import Trajectory

BANDWIDTH_FLOOR = 1e-9


@dataclass(frozen=True)
class TrajectoryBand:
    """Equal-tailed per-timestep interval and median of predicted deflection."""

    times: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    median: np.ndarray

    def __post_init__(self) -> None:
        n = self.times.size
        if not (self.lower.size == self.upper.size == self.median.size == n):
            raise ValueError("band arrays must share one length")
        if not ((self.lower <= self.median).all() and (self.median <= self.upper).all()):
            raise ValueError("band ordering violated (need lower <= median <= upper)")

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True)
class CoverageReport:
    """Fraction of ground-truth points outside the band, and the band width."""

    pct_outside: float
    mean_width: float
    per_episode: tuple[tuple[float, float], ...]  # (pct_outside, mean_width) each


def scott_bandwidth(samples: np.ndarray) -> float:
    """Scott's rule for d=1: sample std times n^(-1/5), floored for zero spread."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    h = float(np.std(samples, ddof=1)) * n ** (-0.2)
    if h < BANDWIDTH_FLOOR:
        warnings.warn("zero-spread samples: applying KDE bandwidth floor")
        h = BANDWIDTH_FLOOR
    return h


def kde_1d(samples: np.ndarray, eval_points: np.ndarray) -> np.ndarray:
    """Gaussian kernel density estimate evaluated at eval_points."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size < 2:
        raise ValueError("kde_1d needs at least two 1-d samples")
    eval_points = np.asarray(eval_points, dtype=float)
    h = scott_bandwidth(samples)
    u = (eval_points[:, None] - samples[None, :]) / h
    dens = np.exp(-0.5 * u**2).sum(axis=1) / (samples.size * h * np.sqrt(2 * np.pi))
    return dens


def _kde_quantiles(samples: np.ndarray, probs: Sequence[float],
                   grid_size: int = 1024) -> np.ndarray:
    """Quantiles of the KDE distribution via its exact mixture CDF."""
    h = scott_bandwidth(samples)
    lo = samples.min() - 6.0 * h
    hi = samples.max() + 6.0 * h
    grid = np.linspace(lo, hi, grid_size)
    cdf = ndtr((grid[:, None] - samples[None, :]) / h).mean(axis=1)
    return np.interp(probs, cdf, grid)


def trajectory_band(
    predicted: Union[np.ndarray, Sequence[Trajectory]],
    level: float = 0.95,
    times: np.ndarray | None = None,
) -> TrajectoryBand:
    """Central ``level`` interval of the per-timestep deflection KDE.

    ``predicted`` is either a list of trajectories (their signed vertical
    deflections are banded) or an (n_samples, n_timesteps) deflection matrix.
    """
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    if len(predicted) and isinstance(predicted[0], Trajectory):
        if any(t.diverged for t in predicted):
            raise ValueError("cannot band diverged trajectories; filter them first")
        matrix = np.stack([t.deflection for t in predicted])
        if times is None:
            g = predicted[0].n_samples
            times = (np.arange(g) + 1) * predicted[0].dt_obs
    else:
        matrix = np.atleast_2d(np.asarray(predicted, dtype=float))
        if times is None:
            times = np.arange(matrix.shape[1], dtype=float)
    if matrix.shape[0] < 8:
        raise ValueError("need at least 8 trajectory samples to build a band")
    alpha = (1.0 - level) / 2.0
    g = matrix.shape[1]
    lower = np.empty(g)
    upper = np.empty(g)
    median = np.empty(g)
    for i in range(g):
        lower[i], median[i], upper[i] = _kde_quantiles(
            matrix[:, i], (alpha, 0.5, 1.0 - alpha)
        )
    return TrajectoryBand(times=np.asarray(times, dtype=float),
                          lower=lower, upper=upper, median=median)


def coverage(band: TrajectoryBand,
             gt: Union[np.ndarray, Trajectory]) -> CoverageReport:
    """Score one ground-truth trajectory against a band."""
    values = gt.deflection if isinstance(gt, Trajectory) else np.asarray(gt, dtype=float)
    if values.size != band.times.size:
        raise ValueError("ground truth and band lengths differ")
    outside = (values < band.lower) | (values > band.upper)
    pct = float(outside.mean())
    width = float(band.width.mean())
    return CoverageReport(pct_outside=pct, mean_width=width,
                          per_episode=((pct, width),))


def coverage_many(
    bands: Sequence[TrajectoryBand],
    gts: Sequence[Union[np.ndarray, Trajectory]],
) -> CoverageReport:
    """Aggregate coverage over several episodes (means of the per-episode stats)."""
    if len(bands) != len(gts) or not bands:
        raise ValueError("need one ground truth per band")
    entries = tuple(
        coverage(band, gt).per_episode[0] for band, gt in zip(bands, gts)
    )
    return CoverageReport(
        pct_outside=float(np.mean([e[0] for e in entries])),
        mean_width=float(np.mean([e[1] for e in entries])),
        per_episode=entries,
    )


def kfold_splits(episodes, k: int, seed: int = 0) -> list[tuple[list[int], list[int]]]:
    """Deterministic seeded k-fold partition into (train, test) index lists.

    Folds are disjoint, cover all episodes and differ in size by at most one.
    """
    n = episodes if isinstance(episodes, int) else len(episodes)
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"cannot split {n} episodes into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i, fold in enumerate(folds):
        test = sorted(int(j) for j in fold)
        train = sorted(
            int(j) for other in (folds[:i] + folds[i + 1:]) for j in other
        )
        out.append((train, test))
    return out
