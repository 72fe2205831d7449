"""Acceptance criteria 1-8. Each test records one PASS/FAIL line (see conftest)."""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from alpods.cli import iris_gate, main
from alpods.dag import simpson_index
from alpods.data import balanced_event_sample, case_table, generate_jittered_iris, split_cases, write_csv
from alpods.density import bayes_regions, posterior_curves, posterior_from_densities, sdh_2d
from alpods.descriptions import computed_abc, node_rows
from alpods.evaluation import cross_validate
from alpods.fuzzy import calibrate, event_membership
from alpods.pipeline import TrainConfig, train
from alpods.synthetic import jaccard, planted_populations, two_class_mixture
from alpods.vispanel import probdiff

from oracles import abc_cut_brute_force, gaussian_crossovers, gaussian_pdf, simpson_by_enumeration


def test_criterion_1_jittered_iris(criterion, tmp_path, capsys):
    path = tmp_path / "bench.json"
    start = time.perf_counter()
    code = main(["bench-iris", "--rounds", "50", "--seed", "1", "--json", str(path)])
    seconds = time.perf_counter() - start
    capsys.readouterr()
    report = json.loads(path.read_text())
    gate = iris_gate(report, seconds)
    detail = "; ".join(f"{'ok' if ok else 'MISS'} {name} ({value})" for name, ok, value in gate)
    ok = criterion(1, code == 0 and all(ok for _, ok, _ in gate), detail)
    assert report["completed_rounds"] == 50
    assert ok, detail


def test_criterion_2_scale(criterion, tmp_path, capsys):
    table = two_class_mixture(700_000, 10, seed=0)
    data = tmp_path / "big.csv"
    write_csv(table, data)
    start = time.perf_counter()
    code = main(["train", "--data", str(data), "--out", str(tmp_path / "big.json")])
    seconds = time.perf_counter() - start
    capsys.readouterr()
    n_pop = len(json.loads((tmp_path / "big.json").read_text())["populations"])
    ok = criterion(2, code == 0 and seconds < 120 and 2 <= n_pop <= 9,
                   f"train on 700000 x 10 took {seconds:.1f} s, {n_pop} populations")
    assert ok


def _exhaustive_mask(events, description):
    return np.array([event_membership(e, description) for e in events], dtype=bool)


def test_criterion_3_planted_populations(criterion):
    data = planted_populations(cases_per_class=20, events_per_case=1000, seed=0)
    report = cross_validate(data.table, rounds=50, mode="repeated-split", seed=0)
    model = train(data.table)
    best = {}
    for name, planted in data.planted.items():
        best[name] = max(jaccard(_exhaustive_mask(data.table.events, p), planted) for p in model.populations)
    detail = (f"CV accuracy {report.mean_accuracy:.4f} over {len(report.accuracies)} rounds; "
              + ", ".join(f"Jaccard {k} {v:.3f}" for k, v in best.items()))
    ok = criterion(3, report.mean_accuracy >= 0.95 and all(v >= 0.8 for v in best.values()), detail)
    assert ok, detail


def test_criterion_4_oracles(criterion):
    failures = []
    # Simpson index against ordered-pair enumeration
    for n in range(1, 51):
        for k in range(n + 1):
            if simpson_index(n, k) != pytest.approx(simpson_by_enumeration(n, k), abs=1e-15):
                failures.append(f"simpson({n},{k})")
    # computed ABC A-boundary against brute force
    rng = np.random.default_rng(0)
    for _ in range(1000):
        values = rng.pareto(rng.uniform(0.5, 3.0), rng.integers(1, 60)) + rng.uniform(0, 0.1)
        if len(computed_abc(values).a) != abc_cut_brute_force(values.tolist()):
            failures.append("abc")
    # Bayes regions against analytic Gaussian crossovers
    checked = 0
    for _ in range(100):
        mu = rng.uniform(-3, 3, 2)
        sd = rng.uniform(0.5, 2.0, 2)
        p = rng.uniform(0.2, 0.8)
        lo = min(mu - 6 * sd)
        hi = max(mu + 6 * sd)
        grid = np.linspace(lo, hi, 4001)
        dens = np.vstack([gaussian_pdf(grid, m, s) for m, s in zip(mu, sd)])
        curves = posterior_from_densities(grid, ("A", "B"), dens, np.array([p, 1 - p]))
        step = grid[1] - grid[0]
        found = [r.upper for r in bayes_regions(curves)[:-1]]
        expected = [x for x in gaussian_crossovers(mu[0], sd[0], p, mu[1], sd[1], 1 - p)
                    if grid[0] + step < x < grid[-1] - step]
        if len(found) != len(expected) or any(abs(a - b) > step for a, b in zip(found, expected)):
            failures.append(f"bayes mu={mu} sd={sd} p={p:.3f}: {found} vs {expected}")
        checked += 1
    ok = criterion(4, not failures, f"1326 simpson pairs, 1000 ABC vectors, {checked} Gaussian draws; "
                                    f"{len(failures)} mismatches")
    assert ok, failures[:5]


def _datasets():
    iris, split = generate_jittered_iris(seed=1)
    rng = np.random.default_rng(9)
    blobs = case_table(["x", "y"], {f"c{i}": ("A" if i % 2 else "B", rng.normal(3 * (i % 2), 1, (200, 2)))
                                    for i in range(20)})
    return {
        "iris": split.train,
        "planted": planted_populations(cases_per_class=10, events_per_case=500, seed=1).table,
        "mixture": two_class_mixture(60_000, 10, n_cases=30, seed=2),
        "blobs": blobs,
    }


def test_criterion_5_rule_equivalence(criterion):
    mismatches, checked = 0, 0
    for name, table in _datasets().items():
        cfg = TrainConfig()
        model = train(table, cfg)
        sample = balanced_event_sample(table, cfg.per_class_events, cfg.seed)
        full_rows = node_rows(model.dag, table)
        for p in model.populations:
            node = model.dag.nodes[p.node_id]
            expected = np.zeros(sample.n, bool)
            expected[node.population] = True
            mismatches += int(np.count_nonzero(p.mask(sample.events) != expected))
            expected_full = np.zeros(table.n, bool)
            expected_full[full_rows[p.node_id]] = True
            mismatches += int(np.count_nonzero(p.mask(table.events) != expected_full))
            checked += 1
    ok = criterion(5, mismatches == 0, f"{checked} descriptions on 4 datasets, {mismatches} mismatched events")
    assert ok


def test_criterion_6_normalisation(criterion):
    rng = np.random.default_rng(0)
    worst = {"posterior": 0.0, "sdh": 0.0, "probdiff_range": 0.0, "probdiff_sym": 0.0, "many_few": 0.0}
    for _ in range(20):
        k = rng.integers(2, 5)
        curves = posterior_curves({f"c{i}": rng.normal(rng.uniform(-3, 3), rng.uniform(0.2, 2), rng.integers(5, 300))
                                   for i in range(k)})
        worst["posterior"] = max(worst["posterior"], float(np.abs(curves.posteriors.sum(axis=0) - 1).max()))
        xy = rng.normal(size=(rng.integers(1, 2000), 2)) * rng.uniform(0.1, 10)
        g = sdh_2d(xy[:, 0], xy[:, 1], bins=int(rng.integers(4, 80)), smoothing_passes=int(rng.integers(0, 6)))
        worst["sdh"] = max(worst["sdh"], abs(g.weights.sum() - 1))
        x = rng.normal(size=(500, 3))
        t = case_table(["a", "b", "c"], {"c": ("A", x)})
        mask = rng.random(500) < rng.uniform(0.05, 0.95)
        s1 = probdiff(t, mask, (0, 1)).score
        s2 = probdiff(t, ~mask, (0, 1)).score
        worst["probdiff_range"] = max(worst["probdiff_range"], max(0.0, -s1, s1 - 2))
        worst["probdiff_sym"] = max(worst["probdiff_sym"], abs(s1 - s2))
        clf = calibrate({"A": rng.beta(2, 5, 30), "B": rng.beta(5, 2, 25), "C": rng.random(10)})
        f = rng.random(50)
        worst["many_few"] = max(worst["many_few"], max(abs(clf.many(v) + clf.few(v) - 1) for v in f))
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    ok = criterion(6, all(v <= 1e-9 for v in worst.values()), f"max deviations: {detail}")
    assert ok, detail


def _run(argv):
    assert main(argv) == 0, argv


def test_criterion_7_thread_determinism(criterion, tmp_path, capsys):
    outputs = {}
    for threads in ("1", "4"):
        d = tmp_path / f"t{threads}"
        _run(["gen-iris", "--seed", "3", "--out", str(d)])
        _run(["train", "--data", str(d / "iris_train.csv"), "--out", str(d / "m.json"), "--threads", threads])
        _run(["classify", "--bundle", str(d / "m.json"), "--data", str(d / "iris_test.csv"), "--explain",
              "--out", str(d / "pred.jsonl")])
        _run(["vispanel", "--bundle", str(d / "m.json"), "--data", str(d / "iris_test.csv"), "--population", "1",
              "--out", str(d / "panel"), "--threads", threads])
        code = main(["bench-iris", "--rounds", "4", "--seed", "3", "--json", str(d / "bench.json"),
                     "--threads", threads])
        assert code in (0, 3)
        _run(["evaluate", "--data", str(d / "iris_test.csv"), "--rounds", "3", "--json", str(d / "eval.json"),
              "--threads", threads])
        outputs[threads] = {p.relative_to(d).as_posix(): p.read_bytes()
                            for p in sorted(d.rglob("*")) if p.is_file()}
    capsys.readouterr()
    differing = [k for k in outputs["1"] if outputs["1"][k] != outputs["4"].get(k)]
    ok = criterion(7, not differing and outputs["1"].keys() == outputs["4"].keys(),
                   f"{len(outputs['1'])} output files compared, {len(differing)} differ")
    assert ok, differing


def test_criterion_8_understandability(criterion):
    counts, violations = [], []
    tables = dict(_datasets())
    iris, _ = generate_jittered_iris(seed=5)
    for s in range(10):
        tables[f"iris-split{s}"] = split_cases(iris, 0.5, s).train
    for name, table in tables.items():
        model = train(table)
        n = len(model.populations)
        counts.append(n)
        if model.num_candidates >= 2 and not 2 <= n <= 9:
            violations.append((name, n, model.num_candidates))
    ok = criterion(8, not violations, f"{len(counts)} models, population counts {min(counts)}..{max(counts)}")
    assert ok, violations
