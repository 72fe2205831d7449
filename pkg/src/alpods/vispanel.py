"""Differential population visualisation.

Variable pairs are ranked by the L1 distance between the smoothed 2-D
histograms of the events inside and outside a mask; the ABC A-set of the
ranking forms the panel. Panels are written as plain SVG 1.1 so the output
is byte-for-byte reproducible.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .data import EventTable, make_rng
from .density import DensityGrid2D, bounding_box, sdh_2d
from .descriptions import computed_abc
from .errors import InputError

BACKGROUND = "#B0B0B0"
POPULATION = "#D62728"
MAX_POINTS = 20_000
MAX_PLOTS = 6
PLOT_SIZE = 360
MARGIN = 48

Pair = tuple[int, int]


@dataclass(frozen=True)
class ProbDiff:
    pair: Pair
    score: float
    inside: DensityGrid2D
    outside: DensityGrid2D

    @property
    def grid(self) -> np.ndarray:
        return np.abs(self.inside.weights - self.outside.weights)


@dataclass(frozen=True)
class PanelSpec:
    pairs: list[Pair]
    scores: list[float]
    population: int | None = None
    max_plots: int = MAX_PLOTS


def probdiff(table: EventTable, class_mask: np.ndarray, pair: Pair, bins: int = 64,
             smoothing_passes: int = 3) -> ProbDiff:
    """Sum over cells of |SDH(X,Y | mask) - SDH(X,Y | not mask)| on a shared box."""
    mask = np.asarray(class_mask, dtype=bool)
    if mask.shape != (table.n,):
        raise InputError("class_mask needs one entry per event")
    if mask.all() or not mask.any():
        raise InputError("both the masked and the unmasked event sets must be non-empty")
    i, j = pair
    if i == j:
        raise InputError("a pair needs two different variables")
    x, y = table.events[:, i], table.events[:, j]
    box = bounding_box(x, y)
    inside = sdh_2d(x[mask], y[mask], bins, smoothing_passes, box)
    outside = sdh_2d(x[~mask], y[~mask], bins, smoothing_passes, box)
    score = float(np.abs(inside.weights - outside.weights).sum())
    return ProbDiff((i, j), score, inside, outside)


def score_pairs(table: EventTable, class_mask: np.ndarray, bins: int = 64,
                threads: int = 1) -> dict[Pair, float]:
    pairs = list(combinations(range(table.d), 2))
    work = lambda p: probdiff(table, class_mask, p, bins).score  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(work, pairs))
    else:
        scores = [work(p) for p in pairs]
    return dict(zip(pairs, scores))


def select_panel(scores: dict[Pair, float], max_plots: int = MAX_PLOTS,
                 population: int | None = None) -> PanelSpec:
    """A-set of the pair scores, best first, at most ``max_plots`` pairs."""
    if not scores:
        raise InputError("no variable pairs to choose from")
    pairs = sorted(scores, key=lambda p: (-scores[p], p))
    values = [scores[p] for p in pairs]
    if any(v > 0 for v in values):
        chosen = sorted(computed_abc(values).a)
    else:
        chosen = [0]
    chosen = chosen[:max_plots]
    return PanelSpec([pairs[k] for k in chosen], [values[k] for k in chosen], population, max_plots)


# -- SVG ------------------------------------------------------------------

def _subsample(rows: np.ndarray, limit: int, rng: np.random.Generator) -> np.ndarray:
    if rows.size <= limit:
        return rows
    return np.sort(rng.choice(rows, size=limit, replace=False))


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _plot_group(table: EventTable, pair: Pair, background: np.ndarray, population: np.ndarray,
                title: str) -> str:
    i, j = pair
    x, y = table.events[:, i], table.events[:, j]
    x0, x1, y0, y1 = bounding_box(x, y)
    inner = PLOT_SIZE - 2 * MARGIN

    def px(v):
        return MARGIN + (v - x0) / (x1 - x0) * inner

    def py(v):
        return PLOT_SIZE - MARGIN - (v - y0) / (y1 - y0) * inner

    out = [
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" fill="white" stroke="black"/>',
        f'<text x="{PLOT_SIZE / 2:.1f}" y="{MARGIN - 16}" text-anchor="middle" font-size="13">{_escape(title)}</text>',
        f'<text x="{PLOT_SIZE / 2:.1f}" y="{PLOT_SIZE - 12}" text-anchor="middle" font-size="12">'
        f"{_escape(table.markers[i])}</text>",
        f'<text x="14" y="{PLOT_SIZE / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {PLOT_SIZE / 2:.1f})">{_escape(table.markers[j])}</text>',
        f'<text x="{MARGIN}" y="{PLOT_SIZE - MARGIN + 14}" font-size="9">{x0:.3g}</text>',
        f'<text x="{PLOT_SIZE - MARGIN}" y="{PLOT_SIZE - MARGIN + 14}" text-anchor="end" font-size="9">{x1:.3g}</text>',
        f'<text x="{MARGIN - 4}" y="{PLOT_SIZE - MARGIN}" text-anchor="end" font-size="9">{y0:.3g}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 8}" text-anchor="end" font-size="9">{y1:.3g}</text>',
    ]
    for rows, colour in ((background, BACKGROUND), (population, POPULATION)):
        if rows.size == 0:
            continue
        out.append(f'<g fill="{colour}">')
        out += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="1.2"/>' for a, b in zip(px(x[rows]), py(y[rows]))]
        out.append("</g>")
    return "\n".join(out)


def _svg(width: int, height: int, body: str) -> str:
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n{body}\n</svg>\n'
    )


def render_panel(table: EventTable, population: np.ndarray, spec: PanelSpec, out_dir: str | os.PathLike,
                 label: str = "population", seed: int = 0, max_points: int = MAX_POINTS) -> list[str]:
    """One SVG per pair plus ``panel.svg`` with all plots side by side.

    ``population`` is a boolean event mask; those events are drawn in red on
    top of a grey, subsampled background of the remaining events.
    """
    mask = np.asarray(population, dtype=bool)
    if mask.shape != (table.n,):
        raise InputError("population mask needs one entry per event")
    os.makedirs(out_dir, exist_ok=True)
    rng = make_rng(seed)
    background = _subsample(np.flatnonzero(~mask), max_points, rng)
    members = _subsample(np.flatnonzero(mask), max_points, rng)
    paths, groups = [], []
    for k, pair in enumerate(spec.pairs):
        title = f"{label}: {table.markers[pair[0]]} vs {table.markers[pair[1]]}"
        group = _plot_group(table, pair, background, members, title)
        name = f"pair{k + 1:02d}_{table.markers[pair[0]]}_{table.markers[pair[1]]}.svg"
        path = os.path.join(out_dir, _safe(name))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_svg(PLOT_SIZE, PLOT_SIZE, group))
        paths.append(path)
        groups.append(f'<g transform="translate({k * PLOT_SIZE},0)">\n{group}\n</g>')
    combined = os.path.join(out_dir, "panel.svg")
    with open(combined, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_svg(max(1, len(spec.pairs)) * PLOT_SIZE, PLOT_SIZE, "\n".join(groups)))
    return paths + [combined]


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in name)


def write_manifest(spec: PanelSpec, table: EventTable, files: Sequence[str], path: str | os.PathLike,
                   extra: dict | None = None) -> None:
    manifest = {
        "population": spec.population,
        **(extra or {}),
        "pairs": [
            {"x": table.markers[i], "y": table.markers[j], "score": s, "file": os.path.basename(f)}
            for (i, j), s, f in zip(spec.pairs, spec.scores, files)
        ],
        "combined": os.path.basename(files[-1]) if files else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
