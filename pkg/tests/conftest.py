import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from doubleris.channel import CorrelationParams, NodeGeometry, SystemDims, build_profile  # noqa: E402


@pytest.fixture(scope="session")
def desk_profile():
    return build_profile(NodeGeometry(), SystemDims(8, 4, 16, 16))


@pytest.fixture(scope="session")
def small_profile():
    """Correlated, moderate-gain profile with every branch active."""
    gains = {"1": 1.0, "2": 0.5, "s": 0.3, "3": 0.8, "4": 0.6}
    return build_profile(NodeGeometry(), SystemDims(3, 2, 4, 4),
                         CorrelationParams(spread_t=20.0, spread_r=20.0), gains)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
