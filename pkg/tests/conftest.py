import numpy as np
import pytest

from alpods.data import case_table, generate_jittered_iris
from alpods.pipeline import train


@pytest.fixture(scope="session")
def iris():
    table, split = generate_jittered_iris(seed=1)
    return table, split


@pytest.fixture(scope="session")
def iris_model(iris):
    _, split = iris
    return train(split.train)


@pytest.fixture
def blobs():
    """Two 1-D classes far apart, 10 cases each of 50 events."""
    rng = np.random.default_rng(3)
    cases = {}
    for i in range(10):
        cases[f"a{i}"] = ("A", rng.normal(0.0, 0.3, (50, 1)))
        cases[f"b{i}"] = ("B", rng.normal(5.0, 0.3, (50, 1)))
    return case_table(["x"], cases)


# one PASS/FAIL line per acceptance criterion, printed at the end of the run
CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> bool:
        CRITERIA[number] = (bool(ok), detail)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
