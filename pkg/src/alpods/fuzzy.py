"""Per-population fuzzy classifiers and case-level voting with explanations.

Event membership in a population is crisp. The fuzziness lives on the case
level: ``many(f)`` is the posterior of the population's high-frequency class
given the case's population frequency ``f``; ``few(f) = 1 - many(f)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .density import estimate_pdf_1d, posterior_from_densities, silverman_bandwidth
from .descriptions import PopulationDescription
from .errors import AbstainError, InputError

FREQUENCY_GRID = np.linspace(0.0, 1.0, 101)
DENSITY_FLOOR = 1e-3
INDECISIVE = (0.4, 0.6)
# smallest kernel width for frequency densities; keeps constant samples from collapsing to a spike
MIN_BANDWIDTH = 0.05


@dataclass(frozen=True)
class MembershipFunction:
    grid: np.ndarray
    values: np.ndarray
    tag: str  # "many" or "few"

    def __call__(self, f: float) -> float:
        return float(np.interp(f, self.grid, self.values))

    def indecisive_bands(self) -> list[tuple[float, float]]:
        """Contiguous grid ranges where the membership lies strictly inside (0.4, 0.6)."""
        inside = (self.values > INDECISIVE[0]) & (self.values < INDECISIVE[1])
        bands = []
        start = None
        for i, flag in enumerate(inside):
            if flag and start is None:
                start = i
            if start is not None and (not flag or i == inside.size - 1):
                stop = i if flag else i - 1
                bands.append((float(self.grid[start]), float(self.grid[stop])))
                start = None
        return bands


@dataclass
class PopulationClassifier:
    population: PopulationDescription
    high_class: str
    rest: tuple[str, ...]
    many: MembershipFunction
    densities: dict[str, np.ndarray] = field(default_factory=dict)
    informative: bool = True

    @property
    def few(self) -> MembershipFunction:
        return MembershipFunction(self.many.grid, 1.0 - self.many.values, "few")

    def verdict(self, f: float) -> tuple[str, float, tuple[str, ...]]:
        """``(term, degree, classes voted for)`` at case frequency ``f``."""
        m = self.many(f)
        if m >= 0.5:
            return "many", m, (self.high_class,)
        return "few", 1.0 - m, self.rest

    def to_dict(self) -> dict:
        return {
            "population": self.population.id,
            "high_class": self.high_class,
            "rest": list(self.rest),
            "informative": self.informative,
            "grid": self.many.grid.tolist(),
            "many": self.many.values.tolist(),
            "densities": {k: v.tolist() for k, v in self.densities.items()},
            "indecisive_bands": [list(b) for b in self.many.indecisive_bands()],
        }

    @classmethod
    def from_dict(cls, raw: dict, population: PopulationDescription) -> "PopulationClassifier":
        many = MembershipFunction(np.array(raw["grid"]), np.array(raw["many"]), "many")
        dens = {k: np.array(v) for k, v in raw["densities"].items()}
        return cls(population, raw["high_class"], tuple(raw["rest"]), many, dens, raw["informative"])


@dataclass
class CaseExplanation:
    case_id: str
    predicted: str
    items: list[dict]
    pro: list[str]
    contra: list[str]

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "predicted": self.predicted,
            "populations": self.items,
            "pro": self.pro,
            "contra": self.contra,
        }

    def to_text(self) -> str:
        def terms(names):
            by_name = {it["population"]: it for it in self.items}
            return " and ".join(
                f"{by_name[n]['term']}({n}: {by_name[n]['rule']}) [{by_name[n]['degree']:.2f}]" for n in names
            ) or "-"

        return (f"case {self.case_id}: {self.predicted}\n"
                f"  pro:    {terms(self.pro)}\n"
                f"  contra: {terms(self.contra)}\n")


def event_membership(event: Sequence[float], description: PopulationDescription) -> int:
    """1 iff the event lies in every interval of the description."""
    x = np.asarray(event, dtype=np.float64).ravel()
    for v, (a, b) in description.intervals.items():
        if v >= x.size:
            raise InputError(f"event has {x.size} values, description uses variable {v}")
        if not a < x[v] <= b:
            return 0
    return 1


def case_frequency(events: np.ndarray, description: PopulationDescription) -> float:
    events = np.atleast_2d(np.asarray(events, dtype=np.float64))
    if events.shape[0] == 0:
        raise InputError("a case needs at least one event")
    return float(description.mask(events).mean())


def calibrate(frequencies: Mapping[str, Sequence[float]],
              population: PopulationDescription | None = None) -> PopulationClassifier:
    """Fit many()/few() for one population from per-class case frequencies.

    The high-frequency class is the class with the largest mean frequency;
    every other class is pooled into the "rest". Densities of both sides get
    an additive floor before Bayes' rule, with case proportions as priors.
    """
    if len(frequencies) < 2:
        raise InputError("calibration needs at least two classes")
    freqs = {c: np.asarray(v, dtype=np.float64).ravel() for c, v in frequencies.items()}
    for c, v in freqs.items():
        if v.size == 0:
            raise InputError(f"class {c!r} has no cases")
    means = {c: float(v.mean()) for c, v in freqs.items()}
    high = min(means, key=lambda c: (-means[c], c))
    rest = tuple(sorted(c for c in freqs if c != high))
    rest_f = np.concatenate([freqs[c] for c in rest])
    informative = means[high] > float(rest_f.mean()) + 1e-12

    grid = FREQUENCY_GRID
    dens = []
    for sample in (freqs[high], rest_f):
        h = max(silverman_bandwidth(sample), MIN_BANDWIDTH)
        dens.append(estimate_pdf_1d(sample, grid.size, bounds=(0.0, 1.0), bandwidth=h).values + DENSITY_FLOOR)
    n_high, n_rest = freqs[high].size, rest_f.size
    priors = np.array([n_high, n_rest], dtype=np.float64) / (n_high + n_rest)
    curves = posterior_from_densities(grid, (high, "rest"), np.vstack(dens), priors)
    many = MembershipFunction(grid.copy(), curves.posteriors[0].copy(), "many")
    if population is None:
        population = PopulationDescription(0, {}, [], high)
    return PopulationClassifier(population, high, rest, many,
                                {"high": dens[0], "rest": dens[1]}, informative)


def vote(frequencies: Sequence[float], classifiers: Sequence[PopulationClassifier],
         case_id: str = "") -> CaseExplanation:
    """Majority vote of the informative classifiers at the given case frequencies.

    Ties go to the class with the larger min-conjunction of winning degrees,
    then to the lexicographically smallest class.
    """
    counts: dict[str, int] = {}
    support: dict[str, float] = {}
    items = []
    for clf, f in zip(classifiers, frequencies):
        if not clf.informative:
            continue
        term, degree, voted = clf.verdict(f)
        for c in voted:
            counts[c] = counts.get(c, 0) + 1
            support[c] = min(support.get(c, 1.0), degree)
        items.append({
            "population": clf.population.name,
            "rule": clf.population.rule(),
            "frequency": float(f),
            "term": term,
            "degree": degree,
            "votes": list(voted),
        })
    if not items:
        raise AbstainError("no informative population classifier")
    predicted = min(counts, key=lambda c: (-counts[c], -support[c], c))
    pro = [it["population"] for it in items if predicted in it["votes"]]
    contra = [it["population"] for it in items if predicted not in it["votes"]]
    items.sort(key=lambda it: it["population"])
    return CaseExplanation(case_id, predicted, items, sorted(pro), sorted(contra))


def classify_case(events: np.ndarray, classifiers: Sequence[PopulationClassifier],
                  case_id: str = "") -> tuple[str, CaseExplanation]:
    freqs = [case_frequency(events, clf.population) for clf in classifiers]
    explanation = vote(freqs, classifiers, case_id)
    return explanation.predicted, explanation
