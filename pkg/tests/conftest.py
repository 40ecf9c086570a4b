import sys
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dispkit.core import PointSet

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_points(rng, n, d, grid=None):
    """Uniform points, or points snapped to a coarse grid to force shared coordinates."""
    pts = rng.random((n, d))
    if grid:
        pts = np.round(pts * grid) / grid
    return PointSet(d, pts)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(number))
