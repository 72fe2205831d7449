"""Training pipeline and the self-contained model bundle."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .dag import Dag, GrowthParams, grow_dag
from .data import EventTable, balanced_event_sample
from .descriptions import (
    PopulationDescription,
    case_frequencies,
    describe_populations,
    drop_redundant,
    marker_percentiles,
    renumber,
    rule_sheet,
    select_relevant,
)
from .errors import AbstainError, BundleError, InputError
from .fuzzy import CaseExplanation, PopulationClassifier, calibrate, vote

BUNDLE_FORMAT = "alpods-bundle/1"


@dataclass(frozen=True)
class TrainConfig:
    growth: GrowthParams = field(default_factory=GrowthParams)
    per_class_events: int = 10_000
    max_overlap: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.per_class_events < 1:
            raise InputError("per_class_events must be >= 1")
        if not 0 < self.max_overlap <= 1:
            raise InputError("max_overlap must be in (0, 1]")

    def to_dict(self) -> dict:
        return {**asdict(self.growth), "per_class_events": self.per_class_events,
                "max_overlap": self.max_overlap, "seed": self.seed}

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        growth_keys = {f.name for f in fields(GrowthParams)}
        unknown = set(raw) - growth_keys - {"per_class_events", "max_overlap", "seed"}
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        growth = GrowthParams(**{k: v for k, v in raw.items() if k in growth_keys})
        return cls(growth, int(raw.get("per_class_events", 10_000)),
                   float(raw.get("max_overlap", 0.5)), int(raw.get("seed", 0)))


@dataclass
class Model:
    markers: tuple[str, ...]
    classes: tuple[str, ...]
    percentiles: np.ndarray
    dag: Dag
    populations: list[PopulationDescription]
    classifiers: list[PopulationClassifier]
    num_candidates: int
    config: TrainConfig
    fallback_class: str

    def rule_sheet(self) -> str:
        return rule_sheet(self.populations, self.classes)

    def align(self, table: EventTable) -> np.ndarray:
        """Event matrix with columns in model marker order."""
        missing = [m for m in self.markers if m not in table.markers]
        if missing:
            raise BundleError(f"data lacks markers required by the model: {missing}")
        cols = [table.markers.index(m) for m in self.markers]
        return table.events[:, cols]

    def case_frequencies(self, table: EventTable) -> np.ndarray:
        """(cases, populations) matrix of per-case population frequencies."""
        events = self.align(table)
        out = np.empty((len(table.cases), len(self.classifiers)))
        for j, clf in enumerate(self.classifiers):
            out[:, j] = case_frequencies(table, clf.population.mask(events))
        return out

    def explain(self, table: EventTable) -> list[CaseExplanation]:
        freqs = self.case_frequencies(table)
        out = []
        for i, case in enumerate(table.cases):
            try:
                out.append(vote(freqs[i], self.classifiers, case))
            except AbstainError:
                out.append(CaseExplanation(case, self.fallback_class, [], [], []))
        return out

    def predict(self, table: EventTable) -> dict[str, str]:
        return {e.case_id: e.predicted for e in self.explain(table)}

    # -- bundle -----------------------------------------------------------

    def to_bundle(self) -> dict:
        return {
            "format": BUNDLE_FORMAT,
            "markers": list(self.markers),
            "classes": list(self.classes),
            "percentiles": self.percentiles.tolist(),
            "config": self.config.to_dict(),
            "num_candidates": self.num_candidates,
            "fallback_class": self.fallback_class,
            "populations": [p.to_dict(self.markers) for p in self.populations],
            "classifiers": [c.to_dict() for c in self.classifiers],
            "dag": self.dag.to_dict(),
        }

    @classmethod
    def from_bundle(cls, raw: dict) -> "Model":
        if raw.get("format") != BUNDLE_FORMAT:
            raise BundleError(f"unsupported bundle format {raw.get('format')!r}, expected {BUNDLE_FORMAT!r}")
        try:
            pops = [PopulationDescription.from_dict(p) for p in raw["populations"]]
            by_id = {p.id: p for p in pops}
            clfs = [PopulationClassifier.from_dict(c, by_id[c["population"]]) for c in raw["classifiers"]]
            return cls(
                tuple(raw["markers"]), tuple(raw["classes"]), np.array(raw["percentiles"]),
                Dag.from_dict(raw["dag"]), pops, clfs, raw["num_candidates"],
                TrainConfig.from_dict(raw["config"]), raw["fallback_class"],
            )
        except (KeyError, TypeError) as exc:
            raise BundleError(f"malformed bundle: {exc}") from None

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_bundle(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Model":
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise BundleError(f"{path}: not JSON ({exc})") from None
        return cls.from_bundle(raw)


def calibrate_all(table: EventTable, populations: list[PopulationDescription]) -> list[PopulationClassifier]:
    case_classes = table.case_classes
    out = []
    for p in populations:
        freq = case_frequencies(table, p.mask(table.events))
        per_class = {c: freq[case_classes == c] for c in table.classes}
        out.append(calibrate(per_class, p))
    return out


def train(table: EventTable, config: TrainConfig | None = None) -> Model:
    """Grow the DAG on a balanced event sample, select populations, calibrate voters."""
    config = config or TrainConfig()
    if len(table.classes) < 2:
        raise InputError("need >= 2 classes to train")
    sample = balanced_event_sample(table, config.per_class_events, config.seed)
    dag = grow_dag(sample, config.growth)
    percentiles = marker_percentiles(table)
    candidates = describe_populations(dag, table, percentiles)
    distinct = drop_redundant(candidates, dag, sample.n, config.max_overlap)
    selected = renumber(select_relevant(distinct, reserve=candidates)) if distinct else []
    classifiers = calibrate_all(table, selected)
    counts = {c: int((table.case_classes == c).sum()) for c in table.classes}
    fallback = min(counts, key=lambda c: (-counts[c], c))
    return Model(table.markers, table.classes, percentiles, dag, selected, classifiers,
                 len(candidates), config, fallback)
