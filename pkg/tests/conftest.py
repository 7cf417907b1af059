import numpy as np
import pytest

from filmrec import simulator


@pytest.fixture(scope="session")
def sample():
    return simulator.generate_sample(11, 0)


@pytest.fixture(scope="session")
def samples():
    return [simulator.generate_sample(11, i) for i in range(4)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line and fail the test when the criterion does not hold."""
    def record(name: str, ok: bool, detail: str):
        line = f"{name} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
