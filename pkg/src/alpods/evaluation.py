"""Cross-validation harness, accuracy and understandability statistics."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .data import EventTable, split_cases
from .descriptions import PopulationDescription
from .errors import InputError
from .pipeline import TrainConfig, train

log = logging.getLogger(__name__)

LOOCV_MAX_CASES = 20
MIN_UNDERSTANDABLE = 2
MAX_UNDERSTANDABLE = 14


@dataclass(frozen=True)
class Understandability:
    num_clusters: int
    conditions: tuple[int, ...]
    verdict: str

    @property
    def max_conditions(self) -> int:
        return max(self.conditions, default=0)

    @property
    def mean_conditions(self) -> float:
        return float(np.mean(self.conditions)) if self.conditions else 0.0


def understandability(descriptions: Sequence[PopulationDescription]) -> Understandability:
    """Cluster count and conditions per cluster against the 2..14 readability band."""
    conds = tuple(p.num_conditions for p in descriptions)
    n = len(conds)
    if n < MIN_UNDERSTANDABLE:
        verdict = "trivial"
    elif n > MAX_UNDERSTANDABLE or any(c > MAX_UNDERSTANDABLE for c in conds):
        verdict = "too complex"
    else:
        verdict = "understandable"
    return Understandability(n, conds, verdict)


@dataclass
class RoundResult:
    round: int
    accuracy: float
    n_test_cases: int
    num_clusters: int
    conditions: list[int]
    skipped: str | None = None


@dataclass
class EvalReport:
    mode: str
    seed: int
    rounds: int
    accuracies: list[float]
    clusters: list[int]
    conditions: list[int]
    skipped: list[dict] = field(default_factory=list)
    degenerate: bool = False
    params: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else float("nan")

    @property
    def sd_accuracy(self) -> float:
        return float(np.std(self.accuracies)) if self.accuracies else float("nan")

    def summary(self) -> dict:
        cl = np.array(self.clusters, dtype=float)
        co = np.array(self.conditions, dtype=float)
        return {
            "mean_accuracy": self.mean_accuracy,
            "sd_accuracy": self.sd_accuracy,
            "max_clusters": int(cl.max()) if cl.size else 0,
            "mean_clusters": float(cl.mean()) if cl.size else 0.0,
            "sd_clusters": float(cl.std()) if cl.size else 0.0,
            "max_conditions": int(co.max()) if co.size else 0,
            "mean_conditions": float(co.mean()) if co.size else 0.0,
            "sd_conditions": float(co.std()) if co.size else 0.0,
        }

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "mode": self.mode,
            "seed": self.seed,
            "rounds": self.rounds,
            "completed_rounds": len(self.accuracies),
            "degenerate": self.degenerate,
            **self.summary(),
            "accuracies": self.accuracies,
            "clusters": self.clusters,
            "conditions": self.conditions,
            "skipped": self.skipped,
            "params": self.params,
        }
        if include_timing:
            out["wall_clock_seconds"] = self.wall_clock_seconds
        return out

    def to_text(self) -> str:
        s = self.summary()
        rows = [
            ("Processing Time", f"{self.wall_clock_seconds:.1f} s"),
            ("No of Crossvalidations", f"{len(self.accuracies)} ({self.mode})"),
            ("Max No Of Cluster", f"{s['max_clusters']}"),
            ("Mean No Of Cluster", f"{s['mean_clusters']:.2f} +- {s['sd_clusters']:.2f}"),
            ("Max No Of Conditions for a Cluster", f"{s['max_conditions']}"),
            ("Mean No Of Conditions for a Cluster", f"{s['mean_conditions']:.2f} +- {s['sd_conditions']:.2f}"),
            ("Accuracy", f"{100 * s['mean_accuracy']:.1f} +- {100 * s['sd_accuracy']:.1f}"),
        ]
        width = max(len(k) for k, _ in rows)
        lines = [f"{k.ljust(width)}  {v}" for k, v in rows]
        if self.skipped:
            lines.append(f"skipped rounds: {len(self.skipped)}")
        if self.degenerate:
            lines.append("degenerate: single-class data")
        return "\n".join(lines) + "\n"


def round_seeds(seed: int, rounds: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(rounds)]


def _run_round(args) -> RoundResult:
    r, table, train_cases, test_cases, config, round_seed = args
    train_table = table.select_cases(train_cases)
    test_table = table.select_cases(test_cases)
    if len(train_table.classes) < 2:
        return RoundResult(r, float("nan"), len(test_cases), 0, [], "training split has < 2 classes")
    cfg = TrainConfig(config.growth, config.per_class_events, config.max_overlap, round_seed)
    model = train(train_table, cfg)
    predicted = model.predict(test_table)
    correct = sum(predicted[c] == test_table.class_label[c] for c in test_table.cases)
    return RoundResult(r, correct / len(test_table.cases), len(test_table.cases),
                       len(model.populations), [p.num_conditions for p in model.populations])


def plan_rounds(table: EventTable, rounds: int, mode: str, seed: int) -> list[tuple[list[str], list[str], int]]:
    """(train cases, test cases, round seed) for every round."""
    cases = sorted(table.cases)
    if mode == "leave-one-out":
        seeds = round_seeds(seed, len(cases))
        return [([c for c in cases if c != held], [held], s) for held, s in zip(cases, seeds)]
    plans = []
    for s in round_seeds(seed, rounds):
        split = split_cases(table, 0.5, s)
        test = [] if split.test is None else list(split.test.cases)
        plans.append((list(split.train.cases), test, s))
    return plans


def cross_validate(table: EventTable, config: TrainConfig | None = None, rounds: int = 50,
                   mode: str = "auto", seed: int = 0, threads: int = 1) -> EvalReport:
    """Repeated stratified 50/50 case splits, or leave-one-case-out.

    ``mode="auto"`` picks leave-one-out when the table has at most 20 cases.
    Rounds may run in worker processes; results are joined in round order.
    """
    config = config or TrainConfig()
    start = time.perf_counter()
    if mode == "auto":
        mode = "leave-one-out" if len(table.cases) <= LOOCV_MAX_CASES else "repeated-split"
    if mode not in ("repeated-split", "leave-one-out"):
        raise InputError(f"unknown mode {mode!r}")
    if rounds < 1:
        raise InputError("rounds must be >= 1")
    params = config.to_dict()
    if len(table.classes) < 2:
        log.warning("single-class data: accuracy is trivially 1")
        n = len(table.cases) if mode == "leave-one-out" else rounds
        return EvalReport(mode, seed, n, [1.0] * n, [], [], [], True, params,
                          time.perf_counter() - start)
    if len(table.cases) < 2:
        raise InputError("cross-validation needs at least 2 cases")

    plans = plan_rounds(table, rounds, mode, seed)
    jobs = [(r, table, tr, te, config, s) for r, (tr, te, s) in enumerate(plans) if te]
    skipped = [{"round": r, "reason": "empty test split"} for r, (_, te, _) in enumerate(plans) if not te]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_round, jobs))
    else:
        results = [_run_round(job) for job in jobs]

    report = EvalReport(mode, seed, len(plans), [], [], [], skipped, False, params)
    for res in sorted(results, key=lambda r: r.round):
        if res.skipped:
            log.warning("round %d skipped: %s", res.round, res.skipped)
            report.skipped.append({"round": res.round, "reason": res.skipped})
            continue
        report.accuracies.append(res.accuracy)
        report.clusters.append(res.num_clusters)
        report.conditions.extend(res.conditions)
    report.skipped.sort(key=lambda s: s["round"])
    report.wall_clock_seconds = time.perf_counter() - start
    return report
