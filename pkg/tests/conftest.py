from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from egcluster.events import TemporalNetwork

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def make_net(records, colors=None, **kw) -> TemporalNetwork:
    return TemporalNetwork.from_events(records, colors=colors, **kw)


@pytest.fixture
def three_events() -> TemporalNetwork:
    """a->b at 1, b->c at 3, a->b at 5 (all color m)."""
    return make_net([("a", "b", 1.0, "m"), ("b", "c", 3.0, "m"), ("a", "b", 5.0, "m")])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


#: one line per acceptance criterion, filled by test_acceptance.check
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
