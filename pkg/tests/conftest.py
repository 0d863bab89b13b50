import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_pyramid(rng, amp=0.3):
    """Reference vertices with independent uniform offsets in [-amp, amp]^3."""
    from pyramid_dg import refelem
    from pyramid_dg.geometry import VertexMappedPyramid, min_jacobian

    while True:
        v = refelem.VERTICES + rng.uniform(-amp, amp, size=(5, 3))
        if min_jacobian(v, 5) > 1e-2:
            return VertexMappedPyramid(v)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
