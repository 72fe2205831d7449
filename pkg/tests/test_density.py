import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alpods.density import (
    bayes_regions, estimate_pdf_1d, posterior_curves, posterior_from_densities, sdh_2d, smooth_121,
)
from alpods.errors import InputError

from oracles import gaussian_crossovers, gaussian_pdf


def _analytic(mu, sd, priors, lo=-9, hi=11, g=2001):
    grid = np.linspace(lo, hi, g)
    dens = np.vstack([gaussian_pdf(grid, m, s) for m, s in zip(mu, sd)])
    return posterior_from_densities(grid, ("A", "B"), dens, np.array(priors))


def test_standard_normal_density_at_zero():
    x = np.random.default_rng(0).standard_normal(10_000)
    d = estimate_pdf_1d(x)
    at0 = np.interp(0.0, d.grid, d.values)
    assert abs(at0 - 1 / math.sqrt(2 * math.pi)) < 0.15 * 0.3989


def test_constant_sample_is_a_spike():
    d = estimate_pdf_1d([5, 5, 5])
    assert d.grid[-1] - d.grid[0] == pytest.approx(5e-6)
    assert d.grid.mean() == pytest.approx(5.0)
    assert d.integral() == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=200))
def test_density_integrates_to_one(values):
    assert estimate_pdf_1d(values).integral() == pytest.approx(1.0, abs=1e-6)


def test_empty_input_rejected():
    with pytest.raises(InputError):
        estimate_pdf_1d([])


def test_identical_classes_give_flat_posteriors():
    x = np.random.default_rng(1).normal(size=500)
    c = posterior_curves({"A": x, "B": x})
    np.testing.assert_allclose(c.posteriors, 0.5, atol=1e-12)
    assert bayes_regions(c) == []


def test_equal_prior_crossover_at_midpoint():
    c = _analytic((0, 2), (1, 1), (0.5, 0.5))
    regions = bayes_regions(c)
    step = c.grid[1] - c.grid[0]
    assert len(regions) == 2
    assert regions[0].upper == pytest.approx(1.0, abs=step)
    assert regions[0].winner == "A" and regions[1].winner == "B"
    assert math.isinf(regions[0].lower) and math.isinf(regions[1].upper)


def test_unequal_priors_crossover():
    c = _analytic((0, 3), (1, 1), (0.75, 0.25))
    step = c.grid[1] - c.grid[0]
    expected = 1.5 + math.log(3) / 3
    assert gaussian_crossovers(0, 1, 0.75, 3, 1, 0.25) == pytest.approx([expected])
    assert bayes_regions(c)[0].upper == pytest.approx(expected, abs=step)


def test_kde_crossover_from_samples():
    rng = np.random.default_rng(2)
    c = posterior_curves({"A": rng.normal(0, 1, 20_000), "B": rng.normal(2, 1, 20_000)})
    regions = bayes_regions(c)
    assert len(regions) == 2
    assert regions[0].upper == pytest.approx(1.0, abs=0.1)


def test_class_winning_twice_gives_three_regions():
    grid = np.linspace(-7, 7, 2801)
    a = (gaussian_pdf(grid, -4, 0.5) + gaussian_pdf(grid, 4, 0.5)) / 2
    b = gaussian_pdf(grid, 0, 1.0)
    c = posterior_from_densities(grid, ("A", "B"), np.vstack([a, b]), np.array([0.5, 0.5]))
    regions = bayes_regions(c)
    assert [r.winner for r in regions] == ["A", "B", "A"]
    # grid-scan oracle: sign changes of a - b
    diff = np.sign(a - b)
    flips = grid[:-1][diff[:-1] != diff[1:]] + (grid[1] - grid[0]) / 2
    np.testing.assert_allclose([regions[0].upper, regions[1].upper], flips, atol=grid[1] - grid[0])


def test_denominator_floor_falls_back_to_priors():
    grid = np.linspace(0, 1, 5)
    dens = np.zeros((2, 5))
    dens[0, 0] = 1.0
    c = posterior_from_densities(grid, ("A", "B"), dens, np.array([0.3, 0.7]))
    np.testing.assert_allclose(c.posteriors[:, 1:], [[0.3] * 4, [0.7] * 4])
    np.testing.assert_allclose(c.posteriors.sum(axis=0), 1.0, atol=1e-12)


def test_min_support_filters_regions():
    rng = np.random.default_rng(4)
    a = np.concatenate([rng.normal(0, 0.2, 990), rng.normal(10, 0.2, 10)])
    b = rng.normal(5, 0.2, 1000)
    c = posterior_curves({"A": a, "B": b})
    assert len(bayes_regions(c)) == 3
    kept = bayes_regions(c, min_support=0.05)
    assert len(kept) == 2
    assert all(r.support >= 0.05 for r in kept)


def test_sdh_single_point_and_mass():
    g = sdh_2d([1.0], [2.0], bins=16, smoothing_passes=3)
    assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)
    i, j = np.unravel_index(np.argmax(g.weights), g.weights.shape)
    assert g.weights[max(0, i - 3): i + 4, max(0, j - 3): j + 4].sum() == pytest.approx(1.0)


def test_sdh_uniform_points_without_smoothing():
    xs, ys = np.meshgrid(np.arange(32) + 0.5, np.arange(32) + 0.5)
    g = sdh_2d(xs.ravel(), ys.ravel(), bins=16, smoothing_passes=0, bounds=(0, 32, 0, 32))
    np.testing.assert_allclose(g.weights, 1 / 256)


def test_sdh_gaussian_peak_near_center():
    xy = np.random.default_rng(5).standard_normal((10_000, 2))
    g = sdh_2d(xy[:, 0], xy[:, 1], bins=64, bounds=(-4, 4, -4, 4))
    i, j = np.unravel_index(np.argmax(g.weights), g.weights.shape)
    assert abs(i - 31.5) <= 2.5 and abs(j - 31.5) <= 2.5


def test_smoothing_preserves_mass():
    w = np.random.default_rng(6).random((9, 7))
    assert smooth_121(w, 5).sum() == pytest.approx(w.sum(), rel=1e-12)
