"""Synthetic case-of-events generators used by the benchmarks and tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EventTable, case_table, make_rng


@dataclass(frozen=True)
class PlantedData:
    table: EventTable
    planted: dict[str, np.ndarray]  # planted population name -> boolean event mask


def two_class_mixture(n_events: int = 700_000, n_markers: int = 10, n_cases: int = 100,
                      shift: float = 1.5, seed: int = 0) -> EventTable:
    """Two classes, each a two-component Gaussian mixture; class B is shifted.

    Class A events come from N(0, I) and N(3 e_0, I) (70/30); class B from the
    same components moved by ``shift`` along the first three markers.
    """
    rng = make_rng(seed)
    markers = tuple(f"m{k}" for k in range(n_markers))
    sizes = np.full(n_cases, n_events // n_cases)
    sizes[: n_events - sizes.sum()] += 1
    offset = np.zeros(n_markers)
    offset[: min(3, n_markers)] = shift
    cases = {}
    for c, size in enumerate(sizes):
        cls = "A" if c % 2 == 0 else "B"
        x = rng.standard_normal((size, n_markers))
        second = rng.random(size) < 0.3
        x[second, 0] += 3.0
        if cls == "B":
            x += offset
        cases[f"case{c:03d}"] = (cls, x)
    return case_table(markers, cases)


def planted_populations(cases_per_class: int = 20, events_per_case: int = 1000, n_markers: int = 6,
                        high: float = 0.40, low: float = 0.05, seed: int = 0) -> PlantedData:
    """Background N(0, I) plus two planted, well separated subpopulations.

    P1 sits at +5 on m0 and makes up ``high`` of class A events and ``low`` of
    class B events; P2 sits at +5 on m1 with the frequencies swapped.
    """
    rng = make_rng(seed)
    markers = tuple(f"m{k}" for k in range(n_markers))
    cases, p1, p2 = {}, [], []
    for cls, (f1, f2) in (("A", (high, low)), ("B", (low, high))):
        for i in range(cases_per_class):
            x = rng.standard_normal((events_per_case, n_markers))
            k1 = int(round(f1 * events_per_case))
            k2 = int(round(f2 * events_per_case))
            x[:k1, 0] = rng.normal(5.0, 0.5, k1)
            x[k1:k1 + k2, 1] = rng.normal(5.0, 0.5, k2)
            m1 = np.zeros(events_per_case, bool)
            m1[:k1] = True
            m2 = np.zeros(events_per_case, bool)
            m2[k1:k1 + k2] = True
            cases[f"{cls}{i:03d}"] = (cls, x)
            p1.append(m1)
            p2.append(m2)
    return PlantedData(case_table(markers, cases), {"P1": np.concatenate(p1), "P2": np.concatenate(p2)})


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, bool), np.asarray(b, bool)
    union = np.count_nonzero(a | b)
    return np.count_nonzero(a & b) / union if union else 1.0
