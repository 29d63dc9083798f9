"""RBF kernel over particle sets with median-heuristic bandwidth."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RbfKernelResult:
    """Kernel matrix, its particle gradients and the bandwidth used.

    ``grad[j, i]`` is the gradient of k(theta_j, theta_i) with respect to
    theta_j; summing over j gives the repulsion term of the SVGD update.
    """

    matrix: np.ndarray      # (n, n)
    grad: np.ndarray        # (n, n, N)
    bandwidth_sq: float

    @property
    def grad_sum(self) -> np.ndarray:
        """sum_j grad_{theta_j} k(theta_j, theta_i), shape (n, N)."""
        return self.grad.sum(axis=0)


def rbf_kernel(particles: np.ndarray, bandwidth_floor: float = 1e-8) -> RbfKernelResult:
    """k(a, b) = exp(-|a - b|^2 / (2 sigma^2)) over all particle pairs.

    The bandwidth follows the median heuristic sigma^2 = med^2 / (2 log(n+1))
    with med the median pairwise distance; coincident particles fall back to
    the bandwidth floor.
    """
    particles = np.atleast_2d(np.asarray(particles, dtype=float))
    n = particles.shape[0]
    if n < 2:
        raise ValueError("median-heuristic kernel needs at least two particles")
    diff = particles[:, None, :] - particles[None, :, :]   # diff[j, i] = theta_j - theta_i
    sq_dist = (diff**2).sum(axis=-1)
    pair_dist = np.sqrt(sq_dist[np.triu_indices(n, k=1)])
    med = float(np.median(pair_dist))
    bandwidth_sq = max(med**2 / (2.0 * math.log(n + 1.0)), bandwidth_floor)
    matrix = np.exp(-sq_dist / (2.0 * bandwidth_sq))
    grad = -diff / bandwidth_sq * matrix[:, :, None]
    return RbfKernelResult(matrix=matrix, grad=grad, bandwidth_sq=bandwidth_sq)
