"""Log-prior densities over the parameter vector and their analytic gradients.

Two ingredients: a smoothed box prior that turns hard search bounds into a
quadratic log-penalty outside the box (differentiable everywhere, zero
inside), and a small trained feed-forward regressor whose prediction is used
directly as an additive log-prior encoding a parent/child inequality belief
(child gain below parent gain).  Log-priors from several constraints add.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .optim import Adam

Constraint = tuple["PriorNet", tuple[int, int]]


class PriorTrainingError(RuntimeError):
    """Regressor failed to reach the target training error (raise hidden units)."""


@dataclass(frozen=True)
class SmoothBox:
    """Axis-aligned parameter box with a quadratic log-penalty of scale sigma."""

    lower: np.ndarray
    upper: np.ndarray
    sigma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower/upper must be 1-d arrays of equal length")
        if not (self.lower < self.upper).all():
            raise ValueError("lower bounds must be strictly below upper bounds")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def n_dims(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def _box_terms(theta: np.ndarray, box: SmoothBox):
    over = np.maximum(theta - box.upper, 0.0)
    under = np.maximum(box.lower - theta, 0.0)
    denom = math.sqrt(2.0 * box.sigma**2)
    value = -((over + under) ** 2).sum(axis=-1) / denom
    grad = (2.0 * under - 2.0 * over) / denom
    return value, grad


def smooth_box_log_prior(theta: np.ndarray, box: SmoothBox) -> tuple[float, np.ndarray]:
    """Log-density -sum_i d_i^2 / sqrt(2 sigma^2) and its gradient.

    d_i is the distance of theta_i to the box interval (zero inside).  The
    gradient is continuous everywhere, including across the box boundary.
    """
    theta = np.asarray(theta, dtype=float)
    value, grad = _box_terms(theta, box)
    return float(value), grad


def inequality_labels(theta1, theta2, eta: float, mode: str = "ramp"):
    """Training label for the parent/child inequality theta1 >= theta2.

    ``step`` mode returns 0 or -eta; ``ramp`` mode penalises the violation
    depth, -eta * (theta2 - theta1), which avoids flat regions in the target.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    t1 = np.asarray(theta1, dtype=float)
    t2 = np.asarray(theta2, dtype=float)
    if mode == "step":
        return np.where(t1 >= t2, 0.0, -eta)
    if mode == "ramp":
        return np.where(t1 >= t2, 0.0, -eta * (t2 - t1))
    raise ValueError(f"unknown mode {mode!r} (expected 'step' or 'ramp')")


_ACTIVATIONS = {
    # name -> (value, derivative expressed through the value)
    "tanh": (np.tanh, lambda h: 1.0 - h**2),
    "sigmoid": (lambda z: 1.0 / (1.0 + np.exp(-z)), lambda h: h * (1.0 - h)),
}


@dataclass(frozen=True)
class PriorNet:
    """One-hidden-layer regressor y(x) = w0 + sum_k wk * act(b_k + W_k . u).

    Inputs are normalized to [-1, 1] through u = (x - input_shift) /
    input_scale before entering the hidden layer.
    """

    hidden_weights: np.ndarray   # (k, 1 + n_inputs), column 0 is the bias
    output_weights: np.ndarray   # (k + 1,), entry 0 is the output bias w0
    input_shift: np.ndarray
    input_scale: np.ndarray
    activation: str = "tanh"

    def __post_init__(self) -> None:
        k = self.hidden_weights.shape[0]
        if self.output_weights.shape != (k + 1,):
            raise ValueError("output_weights must have one bias plus one weight per unit")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r}")
        if not (
            np.isfinite(self.hidden_weights).all()
            and np.isfinite(self.output_weights).all()
        ):
            raise ValueError("weights must be finite")

    @property
    def n_hidden(self) -> int:
        return self.hidden_weights.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.hidden_weights.shape[1] - 1

    def value_and_grad(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Prediction and its gradient w.r.t. the raw inputs; x is (..., n_inputs)."""
        act, dact = _ACTIVATIONS[self.activation]
        x = np.asarray(x, dtype=float)
        u = (x - self.input_shift) / self.input_scale
        z = u @ self.hidden_weights[:, 1:].T + self.hidden_weights[:, 0]
        h = act(z)
        y = self.output_weights[0] + h @ self.output_weights[1:]
        # chain rule back through the affine input scaling
        dh = dact(h) * self.output_weights[1:]
        grad = (dh @ self.hidden_weights[:, 1:]) / self.input_scale
        return y, grad


@dataclass(frozen=True)
class PriorTrainConfig:
    hidden_units: int = 32
    grid_size: int = 41
    n_random: int = 1024
    max_epochs: int = 6000
    learning_rate: float = 0.02
    rmse_threshold_frac: float = 0.02   # fraction of eta * mean box width
    seed: int = 0
    check_every: int = 50


def train_prior_net(
    box: SmoothBox, eta: float, mode: str = "ramp",
    train_config: PriorTrainConfig | None = None,
) -> PriorNet:
    """Fit a PriorNet to the inequality labels over a 2-d parameter box.

    Training points are a dense grid plus uniform random draws over the box;
    the fit minimises mean squared error with full-batch Adam and stops once
    the RMSE drops below ``rmse_threshold_frac * eta * mean(box width)``.
    Seeded and reproducible.

    Raises:
        PriorTrainingError: if the threshold is not reached within max_epochs.
    """
    cfg = train_config or PriorTrainConfig()
    if box.n_dims != 2:
        raise ValueError("inequality prior nets are trained over (theta1, theta2) boxes")
    rng = np.random.default_rng(cfg.seed)
    axes = [np.linspace(box.lower[i], box.upper[i], cfg.grid_size) for i in range(2)]
    g1, g2 = np.meshgrid(axes[0], axes[1], indexing="ij")
    grid = np.column_stack([g1.ravel(), g2.ravel()])
    rand = rng.uniform(box.lower, box.upper, size=(cfg.n_random, 2))
    x = np.vstack([grid, rand])
    y = inequality_labels(x[:, 0], x[:, 1], eta, mode)

    shift = 0.5 * (box.lower + box.upper)
    scale = 0.5 * (box.upper - box.lower)
    u = (x - shift) / scale
    y_scale = max(float(np.abs(y).max()), 1e-12)
    y_n = y / y_scale

    k = cfg.hidden_units
    w_hidden = np.empty((k, 3))
    w_hidden[:, 0] = rng.uniform(-2.0, 2.0, size=k)
    w_hidden[:, 1:] = rng.normal(0.0, 1.5, size=(k, 2))
    w_out = np.concatenate([[0.0], rng.normal(0.0, 0.1, size=k)])

    threshold = cfg.rmse_threshold_frac * eta * float(np.mean(box.width))
    params = np.concatenate([w_hidden.ravel(), w_out])
    opt = Adam(lr=cfg.learning_rate)
    n = x.shape[0]
    act, dact = _ACTIVATIONS["tanh"]
    best_rmse = math.inf
    for epoch in range(cfg.max_epochs):
        w_h = params[: 3 * k].reshape(k, 3)
        w_o = params[3 * k:]
        z = u @ w_h[:, 1:].T + w_h[:, 0]
        h = act(z)
        pred = w_o[0] + h @ w_o[1:]
        err = pred - y_n
        if epoch % cfg.check_every == 0:
            rmse = float(np.sqrt(np.mean(err**2))) * y_scale
            best_rmse = min(best_rmse, rmse)
            if rmse < threshold:
                break
        dz = (2.0 / n) * (err[:, None] * w_o[1:]) * dact(h)
        grad = np.concatenate([
            np.column_stack([dz.sum(axis=0), dz.T @ u]).ravel(),
            [2.0 / n * err.sum()],
            (2.0 / n) * (err @ h),
        ])
        params = opt.step(params, grad)
    else:
        raise PriorTrainingError(
            f"training RMSE {best_rmse:.4g} did not reach {threshold:.4g} after "
            f"{cfg.max_epochs} epochs; raise hidden_units or epochs"
        )
    w_h = params[: 3 * k].reshape(k, 3)
    w_o = params[3 * k:]
    return PriorNet(
        hidden_weights=w_h.copy(),
        output_weights=w_o * y_scale,
        input_shift=shift,
        input_scale=scale,
        activation="tanh",
    )


def nn_log_prior(
    theta: np.ndarray, box: SmoothBox, constraints: Sequence[Constraint] = (),
) -> tuple[float, np.ndarray]:
    """Smooth-box log-prior plus every constraint net's prediction, with gradient.

    Each constraint is (net, (parent_dim, child_dim)); its net is evaluated at
    (theta[parent], theta[child]) and the log-priors add (the joint prior
    factorizes over constraints).
    """
    theta = np.asarray(theta, dtype=float)
    value, grad = _box_terms(theta, box)
    value = float(value)
    grad = grad.copy()
    for net, (i, j) in constraints:
        y, g = net.value_and_grad(theta[[i, j]])
        value += float(y)
        grad[i] += g[0]
        grad[j] += g[1]
    return value, grad


def nn_log_prior_batch(
    thetas: np.ndarray, box: SmoothBox, constraints: Sequence[Constraint] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``nn_log_prior`` over rows of thetas: returns (n,), (n, N)."""
    thetas = np.asarray(thetas, dtype=float)
    value, grad = _box_terms(thetas, box)
    grad = grad.copy()
    for net, (i, j) in constraints:
        y, g = net.value_and_grad(thetas[:, [i, j]])
        value = value + y
        grad[:, i] += g[:, 0]
        grad[:, j] += g[:, 1]
    return value, grad


@dataclass(frozen=True)
class ParameterPrior:
    """Bundle of the box prior and any inequality constraint nets."""

    box: SmoothBox
    constraints: tuple[Constraint, ...] = ()

    def log_density(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        return nn_log_prior(theta, self.box, self.constraints)

    def log_density_batch(self, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return nn_log_prior_batch(thetas, self.box, self.constraints)


# --- serialization ------------------------------------------------------------
#
# Flat text format: one header line "k n_inputs activation", then the input
# shift row, the input scale row, k hidden rows (bias then input weights),
# and the output weight row (w0 then per-unit weights).  Floats use %.17g so
# a save/load round-trip is exact.


def save_prior_net(net: PriorNet, path) -> None:
    rows = [
        f"{net.n_hidden} {net.n_inputs} {net.activation}",
        " ".join(f"{v:.17g}" for v in net.input_shift),
        " ".join(f"{v:.17g}" for v in net.input_scale),
    ]
    rows += [" ".join(f"{v:.17g}" for v in row) for row in net.hidden_weights]
    rows.append(" ".join(f"{v:.17g}" for v in net.output_weights))
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def load_prior_net(path) -> PriorNet:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    k_str, n_str, activation = lines[0].split()
    k, n_in = int(k_str), int(n_str)
    shift = np.array([float(v) for v in lines[1].split()])
    scale = np.array([float(v) for v in lines[2].split()])
    hidden = np.array([[float(v) for v in lines[3 + i].split()] for i in range(k)])
    out = np.array([float(v) for v in lines[3 + k].split()])
    if hidden.shape != (k, n_in + 1) or out.size != k + 1:
        raise ValueError(f"malformed prior net file {path}")
    return PriorNet(hidden, out, shift, scale, activation)
