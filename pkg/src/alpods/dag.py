"""Recursive growth of the Bayesian decision DAG.

Each node owns a population (row indices into the training table). A node
is split by Bayes decision regions on single variables; a region becomes an
edge when its Simpson index passes the significance threshold. Populations
reached through different paths but described by the same intersected
intervals share one node.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .data import EventTable
from .density import GRID_POINTS, bayes_regions, posterior_curves
from .errors import InputError

Interval = tuple[float, float]
Signature = tuple[tuple[int, float, float], ...]


@dataclass(frozen=True)
class GrowthParams:
    min_size_fraction: float = 0.01
    max_depth: int = 6
    si_threshold: float = 0.02
    max_nodes: int = 512
    max_children_per_variable: int = 2
    min_region_support: float = 0.05
    # score splits by 1 - 2q(1-q) instead of 2q(1-q)
    si_complement: bool = False
    grid_points: int = GRID_POINTS

    def __post_init__(self):
        checks = [
            (0 < self.min_size_fraction < 1, "min_size_fraction must be in (0, 1)"),
            (self.max_depth >= 1, "max_depth must be >= 1"),
            (0 <= self.si_threshold <= 1, "si_threshold must be in [0, 1]"),
            (self.max_nodes >= 1, "max_nodes must be >= 1"),
            (self.max_children_per_variable >= 1, "max_children_per_variable must be >= 1"),
            (0 <= self.min_region_support <= 1, "min_region_support must be in [0, 1]"),
            (self.grid_points >= 3, "grid_points must be >= 3"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InputError(msg)


@dataclass(frozen=True)
class Condition:
    """``lower < x[variable] <= upper``; the Bayes winner inside is ``asserted``."""

    variable: int
    lower: float
    upper: float
    asserted: str
    si: float = 0.0

    def mask(self, values: np.ndarray) -> np.ndarray:
        return (values > self.lower) & (values <= self.upper)


@dataclass
class DagNode:
    id: int
    population: np.ndarray
    class_histogram: dict[str, int]
    depth: int
    signature: Signature = ()
    parent: int | None = None
    condition: Condition | None = None
    children: list[tuple[Condition, int]] = field(default_factory=list)
    leaf_label: str | None = None

    @property
    def size(self) -> int:
        return int(sum(self.class_histogram.values()))

    @property
    def asserted(self) -> str | None:
        return None if self.condition is None else self.condition.asserted


@dataclass
class Dag:
    nodes: dict[int, DagNode]
    root: int
    registry: dict[Signature, int]
    params: GrowthParams
    classes: tuple[str, ...]
    markers: tuple[str, ...]

    def edges(self):
        for node in self.nodes.values():
            for cond, child in node.children:
                yield node.id, child, cond

    def to_dict(self) -> dict:
        def cond_dict(c: Condition) -> dict:
            return {
                "variable": c.variable,
                "marker": self.markers[c.variable],
                "lower": finite_or_none(c.lower),
                "upper": finite_or_none(c.upper),
                "class": c.asserted,
                "si": c.si,
            }

        nodes = []
        for node in self.nodes.values():
            nodes.append({
                "id": node.id,
                "depth": node.depth,
                "parent": node.parent,
                "size": node.size,
                "class_histogram": node.class_histogram,
                "condition": None if node.condition is None else cond_dict(node.condition),
                "signature": [[v, finite_or_none(a), finite_or_none(b)] for v, a, b in node.signature],
                "children": [{"child": child, "condition": cond_dict(c)} for c, child in node.children],
                "leaf_label": node.leaf_label,
            })
        return {
            "classes": list(self.classes),
            "markers": list(self.markers),
            "params": asdict(self.params),
            "root": self.root,
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Dag":
        """Rebuild the structure; populations are not serialised and come back empty."""

        def cond(c: dict) -> Condition:
            return Condition(c["variable"], none_to_inf(c["lower"], -1), none_to_inf(c["upper"], 1), c["class"], c["si"])

        nodes = {}
        for item in raw["nodes"]:
            sig = tuple((v, none_to_inf(a, -1), none_to_inf(b, 1)) for v, a, b in item["signature"])
            nodes[item["id"]] = DagNode(
                id=item["id"],
                population=np.empty(0, dtype=np.int64),
                class_histogram=dict(item["class_histogram"]),
                depth=item["depth"],
                signature=sig,
                parent=item["parent"],
                condition=None if item["condition"] is None else cond(item["condition"]),
                children=[(cond(ch["condition"]), ch["child"]) for ch in item["children"]],
                leaf_label=item["leaf_label"],
            )
        registry = {n.signature: n.id for n in nodes.values()}
        return cls(nodes, raw["root"], registry, GrowthParams(**raw["params"]),
                   tuple(raw["classes"]), tuple(raw["markers"]))


def finite_or_none(x: float) -> float | None:
    return None if math.isinf(x) else float(x)


def none_to_inf(x: float | None, sign: int) -> float:
    return sign * math.inf if x is None else float(x)


def simpson_index(parent_size: int, sub_size: int) -> float:
    """Probability that two draws (with replacement) disagree on membership: 2q(1-q)."""
    if parent_size < 1:
        raise InputError("parent_size must be >= 1")
    if not 0 <= sub_size <= parent_size:
        raise InputError(f"sub_size {sub_size} outside [0, {parent_size}]")
    q = sub_size / parent_size
    return 2.0 * q * (1.0 - q)


def terminate(depth: int, pop_size: int, total_size: int, class_histogram: Mapping[str, int],
              params: GrowthParams) -> bool:
    nonzero = sum(1 for v in class_histogram.values() if v > 0)
    return nonzero <= 1 or pop_size < params.min_size_fraction * total_size or depth >= params.max_depth


def classify_leaf(class_histogram: Mapping[str, int]) -> str:
    """Majority class; ties go to the lexicographically smallest label."""
    if not class_histogram:
        raise InputError("empty class histogram")
    return min(class_histogram, key=lambda c: (-class_histogram[c], c))


def intersect(signature: Signature, cond: Condition) -> Signature:
    bounds = {v: (a, b) for v, a, b in signature}
    a, b = bounds.get(cond.variable, (-math.inf, math.inf))
    bounds[cond.variable] = (max(a, cond.lower), min(b, cond.upper))
    return tuple((v, *bounds[v]) for v in sorted(bounds))


def _histogram(codes: np.ndarray, classes: tuple[str, ...]) -> dict[str, int]:
    counts = np.bincount(codes, minlength=len(classes))
    return {c: int(n) for c, n in zip(classes, counts)}


def enumerate_conditions(node: DagNode, variable: int, table: EventTable,
                         params: GrowthParams) -> list[Condition]:
    """Significant Bayes-region conditions for one variable at one node."""
    pop = node.population
    if pop.size == 0:
        raise InputError("node population is empty")
    codes = table.event_classes[pop]
    present = np.flatnonzero(np.bincount(codes, minlength=len(table.classes)))
    if present.size < 2:
        return []
    values = table.events[pop, variable]
    curves = posterior_curves(
        {table.classes[k]: values[codes == k] for k in present},
        grid_points=params.grid_points,
    )
    out = []
    for region in bayes_regions(curves, params.min_region_support):
        inside = int(np.count_nonzero((values > region.lower) & (values <= region.upper)))
        si = simpson_index(pop.size, inside)
        if params.si_complement:
            si = 1.0 - si
        if si < params.si_threshold:
            continue
        out.append(Condition(variable, region.lower, region.upper, region.winner, si))
    out.sort(key=lambda c: (-c.si, c.lower))
    return out[: params.max_children_per_variable]


def grow_dag(train: EventTable, params: GrowthParams | None = None) -> Dag:
    """Grow the decision DAG depth-first from the full training table."""
    params = params or GrowthParams()
    classes = train.classes
    codes = train.event_classes
    total = train.n
    root_pop = np.arange(total, dtype=np.int64)
    root = DagNode(0, root_pop, _histogram(codes, classes), 0)
    dag = Dag({0: root}, 0, {(): 0}, params, classes, train.markers)

    def expand(node: DagNode) -> None:
        if terminate(node.depth, node.size, total, node.class_histogram, params):
            node.leaf_label = classify_leaf(node.class_histogram)
            return
        candidates = []
        for v in range(train.d):
            candidates += enumerate_conditions(node, v, train, params)
        candidates.sort(key=lambda c: (c.variable, c.lower))
        # all children are created before descending, so one deep subtree
        # cannot starve its siblings of the node budget
        created = []
        for cond in candidates:
            if len(dag.nodes) >= params.max_nodes:
                break
            sub = node.population[cond.mask(train.events[node.population, cond.variable])]
            if sub.size == 0 or sub.size == node.population.size:
                continue
            sig = intersect(node.signature, cond)
            existing = dag.registry.get(sig)
            if existing is not None:
                # link only forward, and only once
                if dag.nodes[existing].depth > node.depth and all(c != existing for _, c in node.children):
                    node.children.append((cond, existing))
                continue
            child = DagNode(len(dag.nodes), sub, _histogram(codes[sub], classes), node.depth + 1,
                            sig, node.id, cond)
            dag.nodes[child.id] = child
            dag.registry[sig] = child.id
            node.children.append((cond, child.id))
            created.append(child)
        if not node.children:
            node.leaf_label = classify_leaf(node.class_histogram)
        for child in created:
            expand(child)

    expand(root)
    return dag
