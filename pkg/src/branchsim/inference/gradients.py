"""Central finite-difference gradients for black-box objectives.

The per-dimension step is relative, h_i = fd_epsilon * max(|x_i|, 1).  A
non-finite value at a probe point degrades that dimension to a one-sided
difference; if both sides are bad the component is zeroed with a warning.
"""

from __future__ import annotations

import warnings
from typing import Callable

import numpy as np


def _steps(x: np.ndarray, fd_epsilon: float) -> np.ndarray:
    return fd_epsilon * np.maximum(np.abs(x), 1.0)


def fd_gradient(f: Callable[[np.ndarray], float], theta: np.ndarray,
                fd_epsilon: float = 1e-2) -> np.ndarray:
    """Central-difference gradient of a scalar function at theta."""
    theta = np.asarray(theta, dtype=float)
    h = _steps(theta, fd_epsilon)
    grad = np.zeros_like(theta)
    f_center = None
    for i in range(theta.size):
        up = theta.copy()
        up[i] += h[i]
        down = theta.copy()
        down[i] -= h[i]
        f_up = float(f(up))
        f_down = float(f(down))
        up_ok = np.isfinite(f_up)
        down_ok = np.isfinite(f_down)
        if up_ok and down_ok:
            grad[i] = (f_up - f_down) / (2 * h[i])
        elif up_ok or down_ok:
            if f_center is None:
                f_center = float(f(theta))
            grad[i] = (
                (f_up - f_center) / h[i] if up_ok else (f_center - f_down) / h[i]
            )
        else:
            warnings.warn(
                f"finite differences failed on both sides of dimension {i}; "
                "returning zero for that component"
            )
            grad[i] = 0.0
    return grad


def fd_gradient_many(
    f_batch: Callable[[np.ndarray], np.ndarray],
    thetas: np.ndarray,
    fd_epsilon: float = 1e-2,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients at every row of thetas through one batched evaluation.

    All 2N probe points per row plus the row centers go into a single
    ``f_batch`` call, so expensive simulator-backed objectives are evaluated
    in one fan-out.  Returns (gradients (n, N), center values (n,)).
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    n, dim = thetas.shape
    h = _steps(thetas, fd_epsilon)
    probes = np.repeat(thetas[:, None, :], 2 * dim, axis=1)  # (n, 2*dim, dim)
    for i in range(dim):
        probes[:, 2 * i, i] += h[:, i]
        probes[:, 2 * i + 1, i] -= h[:, i]
    flat = np.vstack([probes.reshape(n * 2 * dim, dim), thetas])
    values = np.asarray(f_batch(flat), dtype=float)
    f_probe = values[: n * 2 * dim].reshape(n, 2 * dim)
    f_center = values[n * 2 * dim:]
    f_up = f_probe[:, 0::2]
    f_down = f_probe[:, 1::2]
    up_ok = np.isfinite(f_up)
    down_ok = np.isfinite(f_down)
    grad = np.where(up_ok & down_ok, (f_up - f_down) / (2 * h), 0.0)
    only_up = up_ok & ~down_ok
    only_down = down_ok & ~up_ok
    if only_up.any() or only_down.any():
        grad = np.where(only_up, (f_up - f_center[:, None]) / h, grad)
        grad = np.where(only_down, (f_center[:, None] - f_down) / h, grad)
    dead = ~(up_ok | down_ok)
    if dead.any():
        warnings.warn(
            f"finite differences failed on both sides for {int(dead.sum())} "
            "component(s); returning zero there"
        )
    return grad, f_center
