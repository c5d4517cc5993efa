from __future__ import annotations

import numpy as np
import pytest

from relaxcrb import BRAIN_PROTOCOLS, TissueParams

FAMILIES = list(BRAIN_PROTOCOLS)

# 5 x 5 grid over the brain range (T1 1000-2000 ms, T2 60-110 ms).
GRID_5X5 = [
    TissueParams(3000.0, float(t1), float(t2))
    for t1 in np.linspace(1000.0, 2000.0, 5)
    for t2 in np.linspace(60.0, 110.0, 5)
]


@pytest.fixture(params=FAMILIES)
def family(request):
    return request.param


@pytest.fixture
def protocol(family):
    return BRAIN_PROTOCOLS[family]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
