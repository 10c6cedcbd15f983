import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tripartite import DetectionConfig, ModeMeans  # noqa: E402


@pytest.fixture
def ref_means():
    return ModeMeans(1.0, 0.5, 0.5)


@pytest.fixture
def eta028():
    return DetectionConfig.uniform(0.28)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
