"""Population descriptions: simplified interval rules, +/- tokens, effect sizes
and the ABC-based choice of the relevant few.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dag import Dag, finite_or_none, none_to_inf
from .data import EventTable
from .errors import InputError, IntegrityError

# ranks above every finite effect size; used when the pooled SD is zero
EFFECT_SENTINEL = 1e12
MILLER_MAX = 9
MIN_POPULATIONS = 2
BAND_PERCENTILES = (5, 35, 65, 95)
BAND_LABELS = ("--", "-", "0", "+", "++")

Intervals = dict[int, tuple[float, float]]


@dataclass
class PopulationDescription:
    id: int
    intervals: Intervals  # variable index -> (lower, upper], ascending by variable
    tokens: list[str]
    asserted: str
    effect_size: float = 0.0
    frequencies: dict[str, float] = field(default_factory=dict)
    node_id: int | None = None

    @property
    def num_conditions(self) -> int:
        return len(self.intervals)

    @property
    def name(self) -> str:
        return f"P{self.id}"

    def rule(self) -> str:
        return ", ".join(self.tokens) if self.tokens else "(all events)"

    def mask(self, events: np.ndarray) -> np.ndarray:
        return interval_mask(events, self.intervals)

    def to_dict(self, markers: Sequence[str]) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "node_id": self.node_id,
            "class": self.asserted,
            "effect_size": self.effect_size,
            "intervals": [
                {"variable": v, "marker": markers[v], "lower": finite_or_none(a), "upper": finite_or_none(b)}
                for v, (a, b) in self.intervals.items()
            ],
            "tokens": list(self.tokens),
            "frequencies": dict(self.frequencies),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PopulationDescription":
        intervals = {
            item["variable"]: (none_to_inf(item["lower"], -1), none_to_inf(item["upper"], 1))
            for item in raw["intervals"]
        }
        return cls(raw["id"], intervals, list(raw["tokens"]), raw["class"], raw["effect_size"],
                   dict(raw["frequencies"]), raw["node_id"])


@dataclass(frozen=True)
class AbcPartition:
    order: list[int]  # item indices sorted by value, descending
    values: list[float]  # values in that order
    a: list[int]
    b: list[int]
    c: list[int]


def interval_mask(events: np.ndarray, intervals: Intervals) -> np.ndarray:
    mask = np.ones(events.shape[0], dtype=bool)
    for v, (a, b) in intervals.items():
        col = events[:, v]
        mask &= (col > a) & (col <= b)
    return mask


def simplify_path(dag: Dag, node_id: int) -> Intervals:
    """Intersect the conditions on the creating root->node path, one interval per variable."""
    if node_id not in dag.nodes:
        raise InputError(f"unknown node {node_id}")
    bounds: Intervals = {}
    node = dag.nodes[node_id]
    while node.condition is not None:
        c = node.condition
        a, b = bounds.get(c.variable, (-math.inf, math.inf))
        bounds[c.variable] = (max(a, c.lower), min(b, c.upper))
        node = dag.nodes[node.parent]
    for v, (a, b) in bounds.items():
        if not a < b:
            raise IntegrityError(f"node {node_id}: empty interval on variable {v}")
    return {v: bounds[v] for v in sorted(bounds)}


def marker_percentiles(table: EventTable) -> np.ndarray:
    """(d, 4) array of the 5/35/65/95 percentiles of every marker."""
    return np.percentile(table.events, BAND_PERCENTILES, axis=0).T.copy()


def band_span(interval: tuple[float, float], percentiles: Sequence[float]) -> tuple[int, int]:
    a, b = interval
    edges = np.asarray(percentiles, dtype=np.float64)
    lo = 0 if a == -math.inf else int(np.searchsorted(edges, a, side="right"))
    hi = len(BAND_LABELS) - 1 if b == math.inf else int(np.searchsorted(edges, b, side="left"))
    return lo, max(lo, hi)


def render_symbolic(marker: str, interval: tuple[float, float], percentiles: Sequence[float]) -> str:
    """Plus/minus token for ``lower < x <= upper`` given the marker's band percentiles.

    Bands: ``(-inf,P5]`` --, ``(P5,P35]`` -, ``(P35,P65]`` 0, ``(P65,P95]`` +,
    ``(P95,inf)`` ++.
    """
    if any(np.diff(percentiles) < 0):
        raise InputError("percentiles must be ascending")
    lo, hi = band_span(interval, percentiles)
    last = len(BAND_LABELS) - 1
    if lo == hi:
        return f"{marker}{BAND_LABELS[lo]}"
    if hi == lo + 1:
        return f"{marker}{BAND_LABELS[lo]}..{BAND_LABELS[hi]}"
    if (lo, hi) == (0, last - 1):
        return f"{marker}not({BAND_LABELS[last]})"
    if (lo, hi) == (1, last):
        return f"{marker}not({BAND_LABELS[0]})"
    a, b = interval
    return f"{marker}({a:.4g},{b:.4g}][{BAND_LABELS[lo]}..{BAND_LABELS[hi]}]"


def tokens_for(intervals: Intervals, markers: Sequence[str], percentiles: np.ndarray) -> list[str]:
    return [render_symbolic(markers[v], iv, percentiles[v]) for v, iv in intervals.items()]


def case_frequencies(table: EventTable, mask: np.ndarray) -> np.ndarray:
    """Per-case fraction of events selected by ``mask`` (aligned with ``table.cases``)."""
    hits = np.bincount(table.case_codes, weights=mask.astype(np.float64), minlength=len(table.cases))
    return hits / table.case_sizes


def cohens_d(target: np.ndarray, rest: np.ndarray) -> float:
    """|mean difference| / pooled SD; the sentinel when the SD is 0 but means differ."""
    n1, n2 = target.size, rest.size
    diff = abs(float(target.mean()) - float(rest.mean()))
    dof = n1 + n2 - 2
    ss = (float(((target - target.mean()) ** 2).sum()) + float(((rest - rest.mean()) ** 2).sum()))
    pooled = math.sqrt(ss / dof) if dof > 0 else 0.0
    if pooled <= 1e-15:
        return 0.0 if diff <= 1e-15 else EFFECT_SENTINEL
    return diff / pooled


def effect_size(description: PopulationDescription, table: EventTable, target: str | None = None) -> float:
    """Cohen's d of per-case frequencies: cases of ``target`` against all other cases."""
    target = description.asserted if target is None else target
    freq = case_frequencies(table, description.mask(table.events))
    return effect_size_from_frequencies(freq, table.case_classes, target)


def effect_size_from_frequencies(freq: np.ndarray, case_classes: np.ndarray, target: str) -> float:
    inside = case_classes == target
    if not inside.any() or inside.all():
        raise InputError(f"class {target!r} needs at least one case inside and one outside")
    return cohens_d(freq[inside], freq[~inside])


def mean_frequencies(freq: np.ndarray, case_classes: np.ndarray, classes: Sequence[str]) -> dict[str, float]:
    return {c: float(freq[case_classes == c].mean()) for c in classes if (case_classes == c).any()}


def computed_abc(values: Sequence[float]) -> AbcPartition:
    """Split descending values into A (largest few), B and C.

    The A|B cut is the point of the cumulative share curve closest to (0, 1);
    C starts at the first later item whose share is below the average share.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise InputError("computed ABC needs at least one value")
    if (v < 0).any() or not (v > 0).any():
        raise InputError("values must be non-negative with at least one positive")
    order = np.argsort(-v, kind="stable")
    s = v[order]
    n = s.size
    x = np.arange(1, n + 1) / n
    y = np.cumsum(s) / s.sum()
    dist = np.hypot(x, 1.0 - y)
    cut = int(np.argmin(dist)) + 1  # number of A items; argmin takes the first minimum
    slope = s * n / s.sum()
    below = np.flatnonzero(slope[cut:] < 1.0)
    c_start = cut + int(below[0]) if below.size else n
    idx = order.tolist()
    return AbcPartition(idx, s.tolist(), idx[:cut], idx[cut:c_start], idx[c_start:])


def abc_values(effects: Sequence[float]) -> np.ndarray:
    """Effect sizes as used for ABC: sentinels become twice the largest finite value."""
    e = np.asarray(effects, dtype=np.float64)
    finite = e[e < EFFECT_SENTINEL]
    top = float(finite.max()) if finite.size and finite.max() > 0 else 1.0
    return np.where(e >= EFFECT_SENTINEL, 2.0 * top, e)


def select_relevant(descriptions: Sequence[PopulationDescription], limit: int = MILLER_MAX,
                    reserve: Sequence[PopulationDescription] = ()) -> list[PopulationDescription]:
    """Apply computed ABC repeatedly to the effect sizes until at most ``limit`` remain.

    If fewer than two survive, the next-ranked items of ``descriptions`` and then
    of ``reserve`` fill the result up to two.
    """
    if not descriptions:
        raise InputError("no candidate populations")
    ranked = sorted(descriptions, key=lambda p: (-p.effect_size, p.num_conditions, p.id))
    working = list(ranked)
    while True:
        vals = abc_values([p.effect_size for p in working])
        if not (vals > 0).any():
            break
        a = computed_abc(vals).a
        shrunk = len(a) < len(working)
        working = [working[i] for i in sorted(a)]
        if len(working) <= limit or not shrunk:
            break
    working = working[:limit]
    spare = ranked + sorted(reserve, key=lambda p: (-p.effect_size, p.num_conditions, p.id))
    floor = min(MIN_POPULATIONS, len({p.id for p in spare}))
    chosen = {p.id for p in working}
    for p in spare:
        if len(working) >= floor:
            break
        if p.id not in chosen:
            working.append(p)
            chosen.add(p.id)
    return sorted(working, key=lambda p: (-p.effect_size, p.num_conditions, p.id))


def node_rows(dag: Dag, table: EventTable) -> dict[int, np.ndarray]:
    """Rows of ``table`` falling in every node, following the creating edges."""
    rows = {dag.root: np.arange(table.n, dtype=np.int64)}
    for node_id in sorted(dag.nodes):
        node = dag.nodes[node_id]
        if node.condition is None:
            continue
        parent = rows[node.parent]
        c = node.condition
        rows[node_id] = parent[c.mask(table.events[parent, c.variable])]
    return rows


def describe_populations(dag: Dag, full: EventTable, percentiles: np.ndarray) -> list[PopulationDescription]:
    """One candidate description per distinct non-root DAG population.

    Effect sizes and frequencies are measured on ``full`` (all training cases,
    not the balanced sample the DAG was grown on). Nodes whose training
    populations coincide are reduced to the one with fewest conditions.
    """
    seen: dict[bytes, int] = {}
    candidates: list[PopulationDescription] = []
    nodes = sorted((n for n in dag.nodes.values() if n.condition is not None),
                   key=lambda n: (len(n.signature), n.id))
    keep = []
    for node in nodes:
        key = np.sort(node.population).tobytes() if node.population.size else f"n{node.id}".encode()
        if key in seen:
            continue
        seen[key] = node.id
        keep.append(node)
    rows = node_rows(dag, full)
    case_classes = full.case_classes
    for node in sorted(keep, key=lambda n: n.id):
        intervals = simplify_path(dag, node.id)
        mask = np.zeros(full.n, dtype=bool)
        mask[rows[node.id]] = True
        freq = case_frequencies(full, mask)
        target = node.asserted
        if (case_classes == target).all() or not (case_classes == target).any():
            d = 0.0
        else:
            d = effect_size_from_frequencies(freq, case_classes, target)
        candidates.append(PopulationDescription(
            id=node.id,
            intervals=intervals,
            tokens=tokens_for(intervals, full.markers, percentiles),
            asserted=target,
            effect_size=d,
            frequencies=mean_frequencies(freq, case_classes, full.classes),
            node_id=node.id,
        ))
    return candidates


COMPLEMENT_JACCARD = 0.8


def drop_redundant(candidates: Sequence[PopulationDescription], dag: Dag, n_events: int,
                   max_overlap: float = 0.5,
                   complement_jaccard: float = COMPLEMENT_JACCARD) -> list[PopulationDescription]:
    """Keep candidates in ranking order, skipping those that repeat a kept one.

    A candidate B is skipped when, for some kept A, either
    |A & B| / min(|A|, |B|) >= ``max_overlap`` (near-copy or nested), or B is
    nearly the complement of A (Jaccard of B with not-A >= ``complement_jaccard``):
    its case frequencies are then one minus those of A and add nothing to the vote.
    Sets are the DAG's training populations.
    """
    if max_overlap >= 1.0:
        return list(candidates)
    ranked = sorted(candidates, key=lambda p: (-p.effect_size, p.num_conditions, p.id))
    kept: list[PopulationDescription] = []
    kept_masks = np.zeros((0, n_events), dtype=np.float32)
    kept_sizes = np.zeros(0)
    for p in ranked:
        rows = dag.nodes[p.node_id].population
        mask = np.zeros(n_events, dtype=np.float32)
        mask[rows] = 1.0
        if kept:
            inter = kept_masks @ mask
            overlap = inter / np.maximum(np.minimum(kept_sizes, rows.size), 1)
            # |B & not A| / |B | not A|
            complement = (rows.size - inter) / np.maximum(n_events - kept_sizes + inter, 1)
            if (overlap >= max_overlap).any() or (complement >= complement_jaccard).any():
                continue
        kept.append(p)
        kept_masks = np.vstack([kept_masks, mask])
        kept_sizes = np.append(kept_sizes, rows.size)
    return kept


def renumber(selected: Sequence[PopulationDescription]) -> list[PopulationDescription]:
    """Give the selected populations the ids 1..m in ranking order."""
    out = []
    for i, p in enumerate(selected, start=1):
        out.append(PopulationDescription(i, dict(p.intervals), list(p.tokens), p.asserted,
                                         p.effect_size, dict(p.frequencies), p.node_id))
    return out


def rule_sheet(descriptions: Sequence[PopulationDescription], classes: Sequence[str]) -> str:
    """Plain-text table: population, rule, class, |d| and mean frequency per class in %."""
    head = ["Pop", "Description Rule", "Class", "|d|"] + [f"{c} [%]" for c in classes]
    rows = []
    for p in descriptions:
        d = "inf" if p.effect_size >= EFFECT_SENTINEL else f"{p.effect_size:.2f}"
        rows.append([str(p.id), p.rule(), p.asserted, d]
                    + [f"{100 * p.frequencies.get(c, 0.0):.1f}" for c in classes])
    widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in [head] + rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
