"""1-D class-conditional densities, Bayes posteriors and 2-D smoothed histograms.

Densities are Gaussian kernel estimates with Silverman's bandwidth, evaluated
by binning the sample onto a uniform grid and convolving with a discretised
kernel. This keeps the cost linear in the number of events.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError

GRID_POINTS = 256
DENOMINATOR_FLOOR = 1e-12
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DensityGrid:
    grid: np.ndarray
    values: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))


@dataclass(frozen=True)
class PosteriorCurves:
    grid: np.ndarray
    classes: tuple[str, ...]
    posteriors: np.ndarray  # (k, g)
    priors: np.ndarray
    densities: np.ndarray  # (k, g)
    # pooled sample the curves were fit on; used for region support
    values: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class DecisionRegion:
    lower: float
    upper: float
    winner: str
    margin: float
    support: float


@dataclass(frozen=True)
class DensityGrid2D:
    x_centers: np.ndarray
    y_centers: np.ndarray
    weights: np.ndarray  # (bins, bins), [i, j] = x bin i, y bin j
    bounds: tuple[float, float, float, float]


def spike_width(value: float) -> float:
    return 1e-6 * max(1.0, abs(value))


def silverman_bandwidth(values: np.ndarray) -> float:
    n = values.size
    if n < 2:
        return 0.0
    sd = float(values.std(ddof=1))
    if sd == 0.0:
        return 0.0
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n ** -0.2


def _binned_kde(values: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    g = grid.size
    lo, step = grid[0], grid[1] - grid[0]
    pos = np.clip((values - lo) / step, 0.0, g - 1.0)
    idx = np.minimum(pos.astype(np.int64), g - 2)
    frac = pos - idx
    counts = np.bincount(idx, 1.0 - frac, minlength=g) + np.bincount(idx + 1, frac, minlength=g)
    half = min(g - 1, int(np.ceil(4.0 * h / step))) if h > 0 else 0
    if half == 0:
        return counts
    offsets = np.arange(-half, half + 1) * step
    kernel = np.exp(-0.5 * (offsets / h) ** 2)
    kernel /= kernel.sum()
    return np.convolve(counts, kernel)[half : half + g]


def estimate_pdf_1d(
    values: Sequence[float],
    grid_points: int = GRID_POINTS,
    bounds: tuple[float, float] | None = None,
    bandwidth: float | None = None,
) -> DensityGrid:
    """Gaussian KDE on a uniform grid, normalised to unit trapezoid integral.

    Without ``bounds`` the grid spans ``[min - 3h, max + 3h]``. A constant
    sample becomes a uniform spike of width ``1e-6 * max(1, |v|)``.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise InputError("cannot estimate a density from no values")
    if grid_points < 2:
        raise InputError("grid_points must be >= 2")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if bounds is None:
        lo, hi = float(x.min()), float(x.max())
        if h == 0.0 or lo == hi:
            eps = spike_width(lo)
            grid = np.linspace(lo - eps / 2, lo + eps / 2, grid_points)
            return DensityGrid(grid, np.full(grid_points, 1.0 / (grid[-1] - grid[0])), 0.0)
        lo, hi = lo - 3 * h, hi + 3 * h
    else:
        lo, hi = map(float, bounds)
        if not hi > lo:
            raise InputError("bounds must satisfy lower < upper")
    grid = np.linspace(lo, hi, grid_points)
    dens = _binned_kde(x, grid, h)
    return DensityGrid(grid, dens / np.trapezoid(dens, grid), h)


def posterior_from_densities(
    grid: np.ndarray,
    classes: Sequence[str],
    densities: np.ndarray,
    priors: np.ndarray,
    values: np.ndarray | None = None,
) -> PosteriorCurves:
    """Bayes' rule pointwise; where the evidence is below the floor, posteriors equal priors."""
    priors = np.asarray(priors, dtype=np.float64)
    densities = np.asarray(densities, dtype=np.float64)
    joint = priors[:, None] * densities
    evidence = joint.sum(axis=0)
    flat = evidence < DENOMINATOR_FLOOR
    post = joint / np.where(flat, 1.0, evidence)
    post[:, flat] = priors[:, None]
    return PosteriorCurves(np.asarray(grid), tuple(classes), post, priors, densities, values)


def posterior_curves(
    values_by_class: Mapping[str, Sequence[float]],
    priors: Mapping[str, float] | None = None,
    grid_points: int = GRID_POINTS,
) -> PosteriorCurves:
    """Per-class KDEs on one shared grid, combined into posteriors.

    ``priors`` defaults to the class proportions of the given values.
    """
    classes = tuple(values_by_class)
    if len(classes) < 2:
        raise InputError("posterior curves need at least 2 classes")
    samples = [np.asarray(values_by_class[c], dtype=np.float64).ravel() for c in classes]
    for c, s in zip(classes, samples):
        if s.size == 0:
            raise InputError(f"class {c!r} has no values")
    if priors is None:
        sizes = np.array([s.size for s in samples], dtype=np.float64)
        prior = sizes / sizes.sum()
    else:
        prior = np.array([priors[c] for c in classes], dtype=np.float64)
        if abs(prior.sum() - 1.0) > 1e-9 or (prior < 0).any():
            raise InputError("priors must be non-negative and sum to 1")
    bws = [silverman_bandwidth(s) for s in samples]
    lo = min(float(s.min()) for s in samples)
    hi = max(float(s.max()) for s in samples)
    pad = 3 * max(bws)
    lo, hi = lo - pad, hi + pad
    if hi - lo < spike_width(lo):
        mid = (lo + hi) / 2
        lo, hi = mid - spike_width(mid) / 2, mid + spike_width(mid) / 2
    grid = np.linspace(lo, hi, grid_points)
    dens = np.vstack([_binned_kde(s, grid, h) for s, h in zip(samples, bws)])
    dens /= np.trapezoid(dens, grid, axis=1)[:, None]
    return posterior_from_densities(grid, classes, dens, prior, np.concatenate(samples))


def _fill_no_evidence(winner: np.ndarray, flat: np.ndarray) -> np.ndarray:
    """Hand grid stretches without evidence to their neighbouring winners.

    An interior stretch is split at its middle between the winners on either
    side; a stretch at a grid end goes to its only neighbour. Next to a tie
    (or with no neighbour at all) it stays undecided.
    """
    w = winner.copy()
    w[flat] = -2
    g = w.size
    i = 0
    while i < g:
        if w[i] != -2:
            i += 1
            continue
        j = i
        while j + 1 < g and w[j + 1] == -2:
            j += 1
        left = w[i - 1] if i > 0 else None
        right = w[j + 1] if j + 1 < g else None
        if left is not None and right is not None:
            half = (j - i + 1) // 2
            w[i : i + half] = left
            w[i + half : j + 1] = right
        else:
            w[i : j + 1] = left if left is not None else (right if right is not None else -1)
        i = j + 1
    w[w == -2] = -1
    return w


def winner_runs(curves: PosteriorCurves) -> list[tuple[int, int, int]]:
    """Maximal grid runs ``(start, stop_inclusive, class_index)`` with a strict winner.

    Grid points whose evidence is below the floor take the winner of the
    nearest decided neighbour (see ``_fill_no_evidence``).
    """
    post = curves.posteriors
    if post.shape[0] == 1:
        winner = np.zeros(post.shape[1], dtype=np.int64)
    else:
        top2 = np.sort(post, axis=0)[-2:]
        winner = np.where(top2[1] - top2[0] > TIE_TOLERANCE, post.argmax(axis=0), -1)
        evidence = (curves.priors[:, None] * curves.densities).sum(axis=0)
        flat = evidence < DENOMINATOR_FLOOR
        if flat.any() and not flat.all():
            winner = _fill_no_evidence(winner, flat)
    change = np.flatnonzero(np.diff(winner)) + 1
    starts = np.concatenate(([0], change))
    stops = np.concatenate((change - 1, [winner.size - 1]))
    return [(int(a), int(b), int(winner[a])) for a, b in zip(starts, stops) if winner[a] >= 0]


def bayes_regions(curves: PosteriorCurves, min_support: float = 0.0) -> list[DecisionRegion]:
    """Intervals where one class strictly maximises the posterior.

    Boundaries fall halfway between grid points; runs touching the grid ends
    extend to infinity. Intervals are half-open ``(lower, upper]``. Runs
    holding less than ``min_support`` of the fitted values are dropped.
    """
    grid = curves.grid
    g = grid.size
    post = curves.posteriors
    values = curves.values
    regions = []
    for start, stop, k in winner_runs(curves):
        lower = -np.inf if start == 0 else 0.5 * (grid[start - 1] + grid[start])
        upper = np.inf if stop == g - 1 else 0.5 * (grid[stop] + grid[stop + 1])
        if values is not None and values.size:
            support = float(np.count_nonzero((values > lower) & (values <= upper))) / values.size
        else:
            support = 1.0
        if support < min_support:
            continue
        seg = post[:, start : stop + 1]
        others = np.delete(seg, k, axis=0)
        margin = float((seg[k] - others.max(axis=0)).mean()) if others.size else 1.0
        regions.append(DecisionRegion(float(lower), float(upper), curves.classes[k], margin, support))
    return regions


def smooth_121(weights: np.ndarray, passes: int) -> np.ndarray:
    """Separable (1,2,1)/4 smoothing, reflecting at the borders (mass preserving)."""
    w = np.asarray(weights, dtype=np.float64)
    for _ in range(passes):
        for axis in range(w.ndim):
            p = np.pad(w, [(1, 1) if a == axis else (0, 0) for a in range(w.ndim)], mode="edge")
            lo = np.take(p, range(0, w.shape[axis]), axis=axis)
            mid = np.take(p, range(1, w.shape[axis] + 1), axis=axis)
            hi = np.take(p, range(2, w.shape[axis] + 2), axis=axis)
            w = (lo + 2 * mid + hi) / 4
    return w


def bounding_box(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    box = []
    for v in (x, y):
        lo, hi = float(v.min()), float(v.max())
        if hi - lo < spike_width(lo):
            lo, hi = lo - spike_width(lo) / 2, lo + spike_width(lo) / 2
        box += [lo, hi]
    return tuple(box)


def sdh_2d(
    x: Sequence[float],
    y: Sequence[float],
    bins: int = 64,
    smoothing_passes: int = 3,
    bounds: tuple[float, float, float, float] | None = None,
) -> DensityGrid2D:
    """Smoothed 2-D data histogram over ``bounds`` (default: the bounding box)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise InputError(f"x and y differ in length ({x.size} vs {y.size})")
    if x.size == 0:
        raise InputError("sdh_2d needs at least one point")
    if bins < 1 or smoothing_passes < 0:
        raise InputError("bins must be >= 1 and smoothing_passes >= 0")
    bounds = bounding_box(x, y) if bounds is None else tuple(map(float, bounds))
    x0, x1, y0, y1 = bounds
    ix = np.clip(((x - x0) / (x1 - x0) * bins).astype(np.int64), 0, bins - 1)
    iy = np.clip(((y - y0) / (y1 - y0) * bins).astype(np.int64), 0, bins - 1)
    counts = np.bincount(ix * bins + iy, minlength=bins * bins).reshape(bins, bins)
    w = smooth_121(counts.astype(np.float64), smoothing_passes)
    w /= w.sum()
    xe = np.linspace(x0, x1, bins + 1)
    ye = np.linspace(y0, y1, bins + 1)
    return DensityGrid2D((xe[:-1] + xe[1:]) / 2, (ye[:-1] + ye[1:]) / 2, w, bounds)
