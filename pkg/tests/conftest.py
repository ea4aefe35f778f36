import numpy as np
import pytest

from pdpfi.data import Dataset


@pytest.fixture
def small_data():
    rng = np.random.default_rng(7)
    X = rng.random((40, 3))
    y = X[:, 0] - 2 * X[:, 1] + 0.1 * rng.normal(size=40)
    return Dataset(X, ("a", "b", "c"), y)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(map(str, r)) + "\n")
    return path


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        status, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status:<4} {detail}")
