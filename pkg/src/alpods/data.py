"""Event tables: the case-of-many-events data model, CSV I/O and sampling.

Every random operation takes an integer seed and draws from a PCG64 bit
generator, so results are reproducible across platforms and runs.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import EmptyDataError, InputError, IntegrityError, ParseError, SchemaError

log = logging.getLogger(__name__)

CASE_COLUMN = "case_id"
CLASS_COLUMN = "class"


def make_rng(seed: int) -> np.random.Generator:
    """The one random source used throughout the package (PCG64)."""
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True, eq=False)
class EventTable:
    """Events (rows) x markers (columns), each event owned by a case.

    ``case_id`` has one entry per event, ``class_label`` maps each case to
    its class. The event matrix is made read-only on construction.
    """

    markers: tuple[str, ...]
    events: np.ndarray
    case_id: np.ndarray
    class_label: Mapping[str, str]

    def __post_init__(self):
        events = np.array(self.events, dtype=np.float64, copy=True)
        if events.ndim != 2:
            raise InputError("events must be a 2-D matrix")
        n, d = events.shape
        if n < 1 or d < 1:
            raise InputError(f"an event table needs n >= 1 and d >= 1, got {n}x{d}")
        if len(self.markers) != d:
            raise InputError(f"{len(self.markers)} marker names for {d} columns")
        if len(set(self.markers)) != d:
            raise InputError("marker names must be unique")
        if not np.isfinite(events).all():
            raise InputError("all event values must be finite")
        case_id = np.asarray(self.case_id).astype(str)
        if case_id.shape != (n,):
            raise InputError("case_id needs exactly one entry per event")
        labels = {str(k): str(v) for k, v in self.class_label.items()}
        missing = set(np.unique(case_id)) - labels.keys()
        if missing:
            raise IntegrityError(f"cases without a class label: {sorted(missing)[:5]}")
        events.flags.writeable = False
        case_id.flags.writeable = False
        object.__setattr__(self, "markers", tuple(str(m) for m in self.markers))
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "case_id", case_id)
        # only cases that own events are kept
        present = dict.fromkeys(case_id.tolist())
        object.__setattr__(self, "class_label", {c: labels[c] for c in present})

    @property
    def n(self) -> int:
        return self.events.shape[0]

    @property
    def d(self) -> int:
        return self.events.shape[1]

    @cached_property
    def cases(self) -> tuple[str, ...]:
        """Case ids in order of first appearance."""
        return tuple(self.class_label)

    @cached_property
    def case_codes(self) -> np.ndarray:
        """Per-event integer index into :attr:`cases`."""
        lookup = {c: i for i, c in enumerate(self.cases)}
        _, first, inverse = np.unique(self.case_id, return_index=True, return_inverse=True)
        remap = np.array([lookup[c] for c in self.case_id[first]], dtype=np.int64)
        return remap[inverse]

    @cached_property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.class_label.values())))

    @cached_property
    def case_classes(self) -> np.ndarray:
        """Per-case class label, aligned with :attr:`cases`."""
        return np.array([self.class_label[c] for c in self.cases])

    @cached_property
    def event_classes(self) -> np.ndarray:
        """Per-event class code, an index into :attr:`classes`."""
        lookup = {c: i for i, c in enumerate(self.classes)}
        per_case = np.array([lookup[c] for c in self.case_classes], dtype=np.int64)
        return per_case[self.case_codes]

    @cached_property
    def case_sizes(self) -> np.ndarray:
        return np.bincount(self.case_codes, minlength=len(self.cases))

    def case_index(self) -> list["CaseIndex"]:
        codes = self.case_codes
        order = np.argsort(codes, kind="stable")
        bounds = np.cumsum(self.case_sizes)[:-1]
        return [
            CaseIndex(case, self.class_label[case], rows)
            for case, rows in zip(self.cases, np.split(order, bounds))
        ]

    def take(self, rows: np.ndarray) -> "EventTable":
        rows = np.asarray(rows, dtype=np.int64)
        return EventTable(self.markers, self.events[rows], self.case_id[rows], self.class_label)

    def select_cases(self, cases: Iterable[str]) -> "EventTable":
        wanted = set(cases)
        mask = np.isin(self.case_id, list(wanted))
        return self.take(np.flatnonzero(mask))

    def column(self, marker: str) -> np.ndarray:
        try:
            return self.events[:, self.markers.index(marker)]
        except ValueError:
            raise SchemaError(f"unknown marker {marker!r}") from None


@dataclass(frozen=True)
class CaseIndex:
    case_id: str
    class_label: str
    rows: np.ndarray


@dataclass(frozen=True)
class DatasetSplit:
    train: EventTable
    test: EventTable
    seed: int


# -- CSV ------------------------------------------------------------------

@dataclass(frozen=True)
class Schema:
    case_column: str = CASE_COLUMN
    class_column: str = CLASS_COLUMN
    markers: tuple[str, ...] | None = None

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        unknown = set(raw) - {"case_column", "class_column", "markers"}
        if unknown:
            raise SchemaError(f"unknown schema keys: {sorted(unknown)}")
        markers = raw.get("markers")
        return cls(
            raw.get("case_column", CASE_COLUMN),
            raw.get("class_column", CLASS_COLUMN),
            tuple(markers) if markers is not None else None,
        )


def load_csv(path: str | os.PathLike, schema: Schema | None = None) -> EventTable:
    """Read a ``case_id,class,<marker...>`` CSV into an :class:`EventTable`.

    When ``schema`` is None a sidecar ``<path>.schema.json`` is honoured if
    present. Rows keep file order.
    """
    if schema is None:
        sidecar = f"{path}.schema.json"
        schema = Schema.from_json(sidecar) if os.path.exists(sidecar) else Schema()
    key_cols = {schema.case_column: str, schema.class_column: str}
    try:
        frame = pd.read_csv(path, dtype=key_cols, keep_default_na=False, na_values=[""],
                            float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path}: no header row") from None
    for col in (schema.case_column, schema.class_column):
        if col not in frame.columns:
            raise SchemaError(f"{path}: missing column {col!r}")
    markers = schema.markers
    if markers is None:
        markers = tuple(c for c in frame.columns if c not in key_cols)
    else:
        absent = [m for m in markers if m not in frame.columns]
        if absent:
            raise SchemaError(f"{path}: missing marker columns {absent}")
    if not markers:
        raise SchemaError(f"{path}: no marker columns")
    if len(frame) == 0:
        raise EmptyDataError(f"{path}: no event rows")

    values = np.empty((len(frame), len(markers)), dtype=np.float64)
    for j, marker in enumerate(markers):
        col = frame[marker]
        num = pd.to_numeric(col, errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(num)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            # +2: header line plus 1-based numbering
            raise ParseError(
                f"{path}: line {row + 2}, column {marker!r}: "
                f"not a finite number: {col.iloc[row]!r}"
            )
        values[:, j] = num

    case_id = frame[schema.case_column].to_numpy(dtype=str)
    klass = frame[schema.class_column].to_numpy(dtype=str)
    pairs = pd.DataFrame({"case": case_id, "cls": klass}).drop_duplicates()
    dup = pairs["case"].duplicated(keep=False)
    if dup.any():
        case = pairs.loc[dup, "case"].iloc[0]
        seen = sorted(pairs.loc[pairs["case"] == case, "cls"])
        raise IntegrityError(f"{path}: case {case!r} has several classes {seen}")
    labels = dict(zip(pairs["case"], pairs["cls"]))
    return EventTable(tuple(markers), values, case_id, labels)


def write_csv(table: EventTable, path: str | os.PathLike) -> None:
    frame = pd.DataFrame(table.events, columns=list(table.markers))
    frame.insert(0, CLASS_COLUMN, table.case_classes[table.case_codes])
    frame.insert(0, CASE_COLUMN, table.case_id)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


# -- Iris ----------------------------------------------------------------

IRIS_MARKERS = ("sepal_length", "sepal_width", "petal_length", "petal_width")


def iris_base() -> tuple[np.ndarray, np.ndarray]:
    """The 150 Anderson/Fisher Iris flowers as (values, species)."""
    with resources.files(__package__).joinpath("iris.csv").open(encoding="utf-8") as fh:
        frame = pd.read_csv(fh)
    return frame[list(IRIS_MARKERS)].to_numpy(dtype=np.float64), frame["species"].to_numpy(dtype=str)


def generate_jittered_iris(
    seed: int, repetitions: int = 10, noise_variance_fraction: float = 0.10
) -> tuple[EventTable, DatasetSplit]:
    """Repeat Iris ``repetitions`` times, adding N(0, fraction * Var(v)) noise.

    Every jittered flower is its own single-event case. The returned split
    halves the cases, stratified by species.
    """
    if repetitions < 1:
        raise InputError("repetitions must be >= 1")
    if noise_variance_fraction < 0:
        raise InputError("noise_variance_fraction must be >= 0")
    base, species = iris_base()
    rng = make_rng(seed)
    sd = np.sqrt(noise_variance_fraction * base.var(axis=0, ddof=1))
    blocks = []
    for _ in range(repetitions):
        blocks.append(base + rng.standard_normal(base.shape) * sd)
    values = np.vstack(blocks)
    m = len(base)
    case_id = np.array([f"iris{r:02d}_{i:03d}" for r in range(repetitions) for i in range(m)])
    labels = dict(zip(case_id.tolist(), np.tile(species, repetitions).tolist()))
    table = EventTable(IRIS_MARKERS, values, case_id, labels)
    return table, split_cases(table, 0.5, seed)


# -- sampling ------------------------------------------------------------

def balanced_event_sample(table: EventTable, per_class_events: int, seed: int) -> EventTable:
    """Draw up to ``per_class_events`` events per class, without replacement."""
    if table is None or table.n == 0:
        raise InputError("cannot sample from an empty table")
    if per_class_events < 1:
        raise InputError("per_class_events must be >= 1")
    rng = make_rng(seed)
    codes = table.event_classes
    picked = []
    for k in range(len(table.classes)):
        rows = np.flatnonzero(codes == k)
        size = min(per_class_events, rows.size)
        picked.append(rng.choice(rows, size=size, replace=False))
    rows = np.concatenate(picked)
    return table.take(rows[rng.permutation(rows.size)])


def split_cases(table: EventTable, train_fraction: float, seed: int) -> DatasetSplit:
    """Stratified-by-class split of whole cases into train and test."""
    if not 0 < train_fraction < 1:
        raise InputError("train_fraction must lie strictly between 0 and 1")
    if len(table.cases) < 2:
        raise InputError("need at least 2 cases to split")
    rng = make_rng(seed)
    by_class: dict[str, list[str]] = {}
    for case in sorted(table.cases):
        by_class.setdefault(table.class_label[case], []).append(case)
    train, test = [], []
    for cls in sorted(by_class):
        cases = by_class[cls]
        if len(cases) < 2:
            log.warning("class %r has %d case(s); kept wholly in train", cls, len(cases))
            train += cases
            continue
        order = rng.permutation(len(cases))
        k = int(np.floor(train_fraction * len(cases) + 0.5))
        k = min(max(k, 1), len(cases) - 1)
        train += [cases[i] for i in order[:k]]
        test += [cases[i] for i in order[k:]]
    test_table = table.select_cases(test) if test else None
    return DatasetSplit(table.select_cases(train), test_table, int(seed))


def case_table(markers: Sequence[str], cases: Mapping[str, tuple[str, np.ndarray]]) -> EventTable:
    """Build a table from ``{case_id: (class, events)}``; handy for tests and generators."""
    ids, blocks, labels = [], [], {}
    for case, (cls, events) in cases.items():
        events = np.atleast_2d(np.asarray(events, dtype=np.float64))
        ids.append(np.full(len(events), case, dtype=object))
        blocks.append(events)
        labels[case] = cls
    return EventTable(tuple(markers), np.vstack(blocks), np.concatenate(ids).astype(str), labels)
