import itertools
import math

import numpy as np
import pytest

from branchsim.evaluation import (
    CoverageReport,
    TrajectoryBand,
    coverage,
    coverage_many,
    kde_1d,
    kfold_splits,
    scott_bandwidth,
    trajectory_band,
)


# --- KDE ---------------------------------------------------------------------


def test_kde_matches_standard_normal_density():
    rng = np.random.default_rng(0)
    samples = rng.standard_normal(10_000)
    dens = kde_1d(samples, np.array([0.0]))
    assert dens[0] == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=0.05)


def test_kde_integrates_to_one():
    rng = np.random.default_rng(1)
    samples = rng.normal(2.0, 0.5, size=400)
    grid = np.linspace(samples.min() - 4, samples.max() + 4, 4001)
    dens = kde_1d(samples, grid)
    integral = np.trapezoid(dens, grid)
    assert integral == pytest.approx(1.0, abs=1e-3)
    assert (dens >= 0).all()


def test_kde_symmetry():
    rng = np.random.default_rng(2)
    half = rng.normal(1.3, 0.7, size=300)
    samples = np.concatenate([half, -half])
    grid = np.linspace(0.1, 4.0, 50)
    assert np.allclose(kde_1d(samples, grid), kde_1d(samples, -grid), atol=1e-12)


def test_kde_zero_spread_floor_warns():
    samples = np.full(10, 3.0)
    with pytest.warns(UserWarning):
        dens = kde_1d(samples, np.array([3.0, 3.1]))
    assert dens[0] > 1e6       # near-delta spike at the repeated value
    assert dens[1] == pytest.approx(0.0, abs=1e-12)


def test_kde_requires_samples():
    with pytest.raises(ValueError):
        kde_1d(np.array([1.0]), np.array([0.0]))


# --- trajectory band ------------------------------------------------------------


def test_band_identical_trajectories_zero_width():
    base = np.sin(np.linspace(0, 2, 40))
    matrix = np.tile(base, (10, 1))
    with pytest.warns(UserWarning):  # zero spread at every timestep
        band = trajectory_band(matrix, level=0.95)
    assert np.allclose(band.median, base, atol=1e-8)
    assert band.width.max() < 1e-7


def test_band_width_monotone_in_spread():
    rng = np.random.default_rng(3)
    base = rng.standard_normal((32, 25))
    widths = []
    for scale in (0.5, 1.0, 2.0):
        band = trajectory_band(base * scale, level=0.95)
        widths.append(band.width.mean())
    assert widths[0] < widths[1] < widths[2]


def test_band_full_level_exceeds_sample_range():
    rng = np.random.default_rng(4)
    matrix = rng.normal(size=(16, 10))
    band = trajectory_band(matrix, level=1.0)
    assert (band.lower < matrix.min(axis=0)).all()
    assert (band.upper > matrix.max(axis=0)).all()


def test_band_needs_eight_samples():
    with pytest.raises(ValueError):
        trajectory_band(np.zeros((7, 5)))


def test_band_ordering_validated():
    with pytest.raises(ValueError):
        TrajectoryBand(
            times=np.arange(3.0),
            lower=np.array([0.0, 0.0, 0.0]),
            upper=np.array([1.0, -1.0, 1.0]),
            median=np.array([0.5, 0.5, 0.5]),
        )


# --- coverage ---------------------------------------------------------------------


def _simple_band():
    g = 20
    return TrajectoryBand(
        times=np.arange(1, g + 1, dtype=float) * 0.02,
        lower=np.full(g, -1.0),
        upper=np.full(g, 1.0),
        median=np.zeros(g),
    )


def test_coverage_median_is_inside():
    band = _simple_band()
    report = coverage(band, band.median)
    assert report.pct_outside == 0.0
    assert report.mean_width == pytest.approx(2.0)


def test_coverage_all_above_upper():
    band = _simple_band()
    report = coverage(band, band.upper + 0.5)
    assert report.pct_outside == 1.0


def test_coverage_monotone_in_band_size():
    rng = np.random.default_rng(5)
    gt = rng.normal(size=20)
    band = _simple_band()
    wide = TrajectoryBand(band.times, band.lower - 1, band.upper + 1, band.median)
    assert coverage(wide, gt).pct_outside <= coverage(band, gt).pct_outside


def test_coverage_length_mismatch_errors():
    with pytest.raises(ValueError):
        coverage(_simple_band(), np.zeros(7))


def test_coverage_many_aggregates():
    band = _simple_band()
    report = coverage_many([band, band], [band.median, band.upper + 1.0])
    assert report.pct_outside == pytest.approx(0.5)
    assert len(report.per_episode) == 2


# --- k-fold -----------------------------------------------------------------------


def test_kfold_three_of_three_is_leave_one_out():
    splits = kfold_splits(3, k=3, seed=0)
    assert len(splits) == 3
    tests = sorted(itertools.chain.from_iterable(t for _, t in splits))
    assert tests == [0, 1, 2]
    for train, test in splits:
        assert len(test) == 1 and len(train) == 2


def test_kfold_six_of_three_gives_pairs():
    splits = kfold_splits(6, k=3, seed=1)
    for train, test in splits:
        assert len(test) == 2 and len(train) == 4


def test_kfold_deterministic():
    assert kfold_splits(9, k=4, seed=7) == kfold_splits(9, k=4, seed=7)
    assert kfold_splits(9, k=4, seed=7) != kfold_splits(9, k=4, seed=8)


def test_kfold_partition_properties_exhaustive():
    for n in range(2, 13):
        for k in range(2, n + 1):
            splits = kfold_splits(n, k=k, seed=n * 31 + k)
            all_test = list(itertools.chain.from_iterable(t for _, t in splits))
            assert sorted(all_test) == list(range(n))   # disjoint and complete
            sizes = [len(t) for _, t in splits]
            assert max(sizes) - min(sizes) <= 1
            for train, test in splits:
                assert sorted(train + test) == list(range(n))


def test_kfold_validation():
    with pytest.raises(ValueError):
        kfold_splits(3, k=4, seed=0)
    with pytest.raises(ValueError):
        kfold_splits(3, k=1, seed=0)
