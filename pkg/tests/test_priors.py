import math

import numpy as np
import pytest

from branchsim.inference import fd_gradient
from branchsim.priors import (
    ParameterPrior,
    PriorNet,
    PriorTrainConfig,
    PriorTrainingError,
    SmoothBox,
    inequality_labels,
    load_prior_net,
    nn_log_prior,
    nn_log_prior_batch,
    save_prior_net,
    smooth_box_log_prior,
    train_prior_net,
)

UNIT_BOX = SmoothBox(np.zeros(2), np.ones(2), sigma=0.05)
ETA = 10.0
TIGHT = PriorTrainConfig(seed=3, rmse_threshold_frac=0.008, max_epochs=12000)


@pytest.fixture(scope="module")
def ramp_net():
    return train_prior_net(UNIT_BOX, ETA, "ramp", TIGHT)


# --- smooth box ----------------------------------------------------------------


def test_box_zero_inside():
    box = SmoothBox(np.array([0.0, 1.0]), np.array([2.0, 3.0]), sigma=0.1)
    value, grad = smooth_box_log_prior(np.array([1.0, 2.0]), box)
    assert value == 0.0
    assert np.array_equal(grad, np.zeros(2))


def test_box_quadratic_penalty_above_upper():
    sigma = 0.2
    delta = 0.37
    box = SmoothBox(np.array([0.0]), np.array([1.0]), sigma=sigma)
    value, grad = smooth_box_log_prior(np.array([1.0 + delta]), box)
    denom = math.sqrt(2 * sigma**2)
    assert value == pytest.approx(-(delta**2) / denom)
    assert grad[0] == pytest.approx(-2 * delta / denom)
    # below the lower bound the gradient points back up
    value_lo, grad_lo = smooth_box_log_prior(np.array([-delta]), box)
    assert value_lo == pytest.approx(value)
    assert grad_lo[0] == pytest.approx(2 * delta / denom)


def test_box_gradient_matches_fd():
    box = SmoothBox(np.array([0.0, -1.0, 2.0]), np.array([1.0, 1.0, 5.0]), sigma=0.3)
    rng = np.random.default_rng(1)
    h = 1e-6
    checked = 0
    while checked < 100:
        theta = rng.uniform(-2.0, 7.0, 3)
        # keep probes clear of the non-smooth box boundary
        if np.any(np.abs(theta - box.lower) < 2 * h) or np.any(
            np.abs(theta - box.upper) < 2 * h
        ):
            continue
        _, grad = smooth_box_log_prior(theta, box)
        num = fd_gradient(lambda t: smooth_box_log_prior(t, box)[0], theta, 1e-6)
        assert np.allclose(grad, num, rtol=1e-5, atol=1e-6)
        checked += 1


def test_box_continuity_across_boundary():
    box = SmoothBox(np.array([0.0]), np.array([1.0]), sigma=0.1)
    eps = 1e-9
    inside_v, inside_g = smooth_box_log_prior(np.array([1.0 - eps]), box)
    outside_v, outside_g = smooth_box_log_prior(np.array([1.0 + eps]), box)
    assert abs(inside_v - outside_v) < 1e-12
    assert abs(inside_g[0] - outside_g[0]) < 1e-7


def test_box_validation():
    with pytest.raises(ValueError):
        SmoothBox(np.array([1.0]), np.array([1.0]), sigma=0.1)
    with pytest.raises(ValueError):
        SmoothBox(np.array([0.0]), np.array([1.0]), sigma=0.0)


# --- inequality labels -----------------------------------------------------------


def test_labels_boundary_zero_both_modes():
    assert inequality_labels(2.0, 2.0, eta=5.0, mode="step") == 0.0
    assert inequality_labels(2.0, 2.0, eta=5.0, mode="ramp") == 0.0


def test_labels_examples():
    assert inequality_labels(1.0, 3.0, eta=2.0, mode="ramp") == -4.0
    assert inequality_labels(1.0, 3.0, eta=50.0, mode="step") == -50.0
    assert inequality_labels(3.0, 1.0, eta=50.0, mode="step") == 0.0
    with pytest.raises(ValueError):
        inequality_labels(1.0, 2.0, eta=-1.0)
    with pytest.raises(ValueError):
        inequality_labels(1.0, 2.0, eta=1.0, mode="nope")


# --- trained ramp net ------------------------------------------------------------


def test_trained_net_near_zero_on_boundary(ramp_net):
    line = np.linspace(0.05, 0.95, 19)
    y, _ = ramp_net.value_and_grad(np.column_stack([line, line]))
    assert np.abs(y).max() < 0.05 * ETA


def test_trained_net_near_zero_deep_in_valid_region(ramp_net):
    pts = np.column_stack([np.full(9, 0.9), np.linspace(0.05, 0.4, 9)])
    y, _ = ramp_net.value_and_grad(pts)
    assert np.abs(y).max() < 0.05 * ETA


def test_trained_net_matches_ramp_at_half_width_violation(ramp_net):
    t1 = np.linspace(0.05, 0.45, 9)
    y, _ = ramp_net.value_and_grad(np.column_stack([t1, t1 + 0.5]))
    exact = -ETA * 0.5
    assert np.abs((y - exact) / exact).max() < 0.10


def test_trained_net_monotone_in_violation_direction(ramp_net):
    # beyond a small tolerance band the prediction never increases with theta2
    band = 0.05
    for t1 in (0.2, 0.5, 0.8):
        t2 = np.linspace(t1 + band, 1.0, 50)
        y, _ = ramp_net.value_and_grad(np.column_stack([np.full(50, t1), t2]))
        assert np.all(np.diff(y) <= 1e-9)


def test_training_failure_raises():
    with pytest.raises(PriorTrainingError):
        train_prior_net(
            UNIT_BOX, ETA, "ramp",
            PriorTrainConfig(seed=0, max_epochs=3, rmse_threshold_frac=1e-6),
        )


def test_training_is_reproducible():
    cfg = PriorTrainConfig(seed=11, max_epochs=400, rmse_threshold_frac=0.05)
    a = train_prior_net(UNIT_BOX, ETA, "ramp", cfg)
    b = train_prior_net(UNIT_BOX, ETA, "ramp", cfg)
    assert np.array_equal(a.hidden_weights, b.hidden_weights)
    assert np.array_equal(a.output_weights, b.output_weights)


# --- composed log-prior -----------------------------------------------------------


def test_nn_log_prior_without_nets_is_box(ramp_net):
    box = SmoothBox(np.array([0.0, 0.0, 0.0, 0.0]), np.ones(4) * 2, sigma=0.1)
    theta = np.array([0.5, 1.2, 2.5, 0.1])
    value, grad = nn_log_prior(theta, box)
    box_value, box_grad = smooth_box_log_prior(theta, box)
    assert value == box_value
    assert np.array_equal(grad, box_grad)


def test_nn_log_prior_additivity(ramp_net):
    box = SmoothBox(np.zeros(4), np.ones(4), sigma=0.1)
    theta = np.array([0.6, 0.3, 0.8, 0.4])
    constraints = [(ramp_net, (0, 2)), (ramp_net, (1, 3))]
    value, _ = nn_log_prior(theta, box, constraints)
    box_v, _ = smooth_box_log_prior(theta, box)
    y1, _ = ramp_net.value_and_grad(theta[[0, 2]])
    y2, _ = ramp_net.value_and_grad(theta[[1, 3]])
    assert value == pytest.approx(box_v + float(y1) + float(y2))


def test_nn_log_prior_gradient_matches_fd(ramp_net):
    box = SmoothBox(np.zeros(4), np.ones(4), sigma=0.1)
    constraints = [(ramp_net, (0, 2)), (ramp_net, (1, 3))]
    rng = np.random.default_rng(5)
    h = 1e-6
    worst = 0.0
    checked = 0
    while checked < 100:
        theta = rng.uniform(-0.3, 1.3, 4)
        if np.any(np.abs(theta - box.lower) < 2 * h) or np.any(
            np.abs(theta - box.upper) < 2 * h
        ):
            continue
        _, grad = nn_log_prior(theta, box, constraints)
        num = fd_gradient(
            lambda t: nn_log_prior(t, box, constraints)[0], theta, 1e-6
        )
        rel = np.abs(grad - num) / np.maximum(np.abs(num), 1e-6)
        worst = max(worst, float(rel.max()))
        checked += 1
    assert worst < 1e-5


def test_batch_log_prior_matches_single(ramp_net):
    box = SmoothBox(np.zeros(4), np.ones(4), sigma=0.1)
    prior = ParameterPrior(box, ((ramp_net, (0, 2)), (ramp_net, (1, 3))))
    rng = np.random.default_rng(9)
    thetas = rng.uniform(-0.2, 1.2, size=(16, 4))
    values, grads = prior.log_density_batch(thetas)
    for i in range(16):
        v, g = prior.log_density(thetas[i])
        assert values[i] == pytest.approx(v, rel=1e-12)
        assert np.allclose(grads[i], g, rtol=1e-12, atol=1e-15)


def test_prior_net_round_trip(tmp_path, ramp_net):
    path = tmp_path / "net.txt"
    save_prior_net(ramp_net, path)
    loaded = load_prior_net(path)
    assert np.array_equal(loaded.hidden_weights, ramp_net.hidden_weights)
    assert np.array_equal(loaded.output_weights, ramp_net.output_weights)
    assert np.array_equal(loaded.input_shift, ramp_net.input_shift)
    assert np.array_equal(loaded.input_scale, ramp_net.input_scale)
    pts = np.random.default_rng(0).uniform(0, 1, size=(10, 2))
    assert np.array_equal(loaded.value_and_grad(pts)[0], ramp_net.value_and_grad(pts)[0])
