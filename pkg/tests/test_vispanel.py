import json
from pathlib import Path

import numpy as np
import pytest

from alpods.data import case_table
from alpods.errors import InputError
from alpods.vispanel import (
    BACKGROUND, POPULATION, PanelSpec, probdiff, render_panel, score_pairs, select_panel, write_manifest,
)

GOLDEN = Path(__file__).parent / "golden" / "toy_panel.svg"


def _table(n=2000, d=3, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    return case_table([f"m{k}" for k in range(d)], {"c0": ("A", x[: n // 2]), "c1": ("B", x[n // 2:])})


def toy():
    rng = np.random.default_rng(42)
    x = np.round(rng.normal(size=(40, 3)), 3)
    x[:10, 0] += 3
    return case_table(["FS", "SS", "CD45"], {"a": ("A", x[:20]), "b": ("B", x[20:])})


def test_same_distribution_scores_near_zero():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(20_000, 2))
    t = case_table(["a", "b"], {"c": ("A", x)})
    mask = np.zeros(t.n, bool)
    mask[:10_000] = True
    assert probdiff(t, mask, (0, 1)).score <= 0.15


def test_disjoint_supports_score_near_two():
    x = np.vstack([np.random.default_rng(2).normal(size=(500, 2)), np.random.default_rng(3).normal(size=(500, 2)) + 50])
    t = case_table(["a", "b"], {"c": ("A", x)})
    mask = np.arange(t.n) < 500
    assert probdiff(t, mask, (0, 1)).score == pytest.approx(2.0, abs=1e-9)


def test_probdiff_bounds_and_complement_symmetry():
    t = _table()
    rng = np.random.default_rng(4)
    for _ in range(10):
        mask = rng.random(t.n) < rng.uniform(0.05, 0.95)
        a = probdiff(t, mask, (0, 2)).score
        b = probdiff(t, ~mask, (0, 2)).score
        assert 0.0 <= a <= 2.0 + 1e-9
        assert a == pytest.approx(b, abs=1e-9)


def test_invalid_masks():
    t = _table()
    with pytest.raises(InputError):
        probdiff(t, np.ones(t.n, bool), (0, 1))
    with pytest.raises(InputError):
        probdiff(t, np.zeros(t.n, bool), (0, 1))


def test_two_markers_give_one_pair():
    t = _table(d=2)
    spec = select_panel(score_pairs(t, np.arange(t.n) < 300))
    assert spec.pairs == [(0, 1)]


def test_dominant_pair_is_panel():
    spec = select_panel({(0, 1): 10.0, (0, 2): 1.0, (1, 2): 1.0, (0, 3): 1.0})
    assert spec.pairs == [(0, 1)]


def test_thread_count_does_not_change_scores():
    t = _table(d=4)
    mask = t.events[:, 1] > 0.5
    assert score_pairs(t, mask, threads=1) == score_pairs(t, mask, threads=4)


def test_empty_and_full_population(tmp_path):
    t = toy()
    spec = PanelSpec([(0, 1)], [1.0])
    svg = Path(render_panel(t, np.zeros(t.n, bool), spec, tmp_path / "e")[0]).read_text()
    assert POPULATION not in svg and BACKGROUND in svg
    svg = Path(render_panel(t, np.ones(t.n, bool), spec, tmp_path / "f")[0]).read_text()
    assert BACKGROUND not in svg and svg.count("<circle") == t.n


def test_golden_svg(tmp_path):
    t = toy()
    mask = np.zeros(t.n, bool)
    mask[:10] = True
    spec = PanelSpec([(0, 1), (0, 2)], [1.0, 0.5], population=1)
    files = render_panel(t, mask, spec, tmp_path, label="P1 (A)", seed=0)
    assert Path(files[-1]).read_bytes() == GOLDEN.read_bytes()
    again = render_panel(t, mask, spec, tmp_path / "again", label="P1 (A)", seed=0)
    assert Path(again[0]).read_bytes() == Path(files[0]).read_bytes()


def test_manifest(tmp_path):
    t = toy()
    spec = PanelSpec([(0, 1)], [1.25], population=2)
    files = render_panel(t, t.events[:, 0] > 1, spec, tmp_path)
    write_manifest(spec, t, files, tmp_path / "manifest.json", {"name": "P2"})
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["pairs"] == [{"x": "FS", "y": "SS", "score": 1.25, "file": Path(files[0]).name}]
    assert m["combined"] == "panel.svg" and m["name"] == "P2"
