import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# shared fixture from the loss contract examples: three points, scalar labels
FIXTURE_A_F = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
FIXTURE_A_Y = np.array([[0.0], [1.0], [2.0]])


ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    """Record one summary line per acceptance criterion: ``acceptance(n, ok, detail)``."""
    def record(criterion, ok, detail):
        ACCEPTANCE_LINES[criterion] = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
