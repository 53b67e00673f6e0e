from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def planted():
    from covsbm.model import make_model

    return make_model("planted-partition", {"p": 0.6, "q": 0.2, "G": 2})


@pytest.fixture
def logistic():
    from covsbm.model import make_model

    return make_model("logistic-homophily", {"alpha": [[2.0, -1.0], [-1.0, 2.0]], "beta": 2.0})


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
