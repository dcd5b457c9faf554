import numpy as np
import pytest

from privload.synthetic import synthetic_dataset, write_synthetic

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE_RESULTS: dict[str, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0])):
        status, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{status}] criterion {key}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset():
    return synthetic_dataset(zones=3, days=60, stations=2, seed=7)


@pytest.fixture
def synthetic_files(tmp_path):
    return write_synthetic(tmp_path / "data", zones=3, days=60, stations=2, seed=7)
