import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from strip_control.domain import StripDomain
from strip_control.geometry import Box, BoxUnion, stripes

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def small_domain():
    return StripDomain(2, 0.5, "dirichlet", 8.0, 6, 32, 1 / 16)


@pytest.fixture
def neumann_domain():
    return StripDomain(2, 0.5, "neumann", 8.0, 4, 24, 1 / 16)


@pytest.fixture
def stripe_set(small_domain):
    return stripes(small_domain)


def unit_box(domain, lo=-0.5, hi=0.5):
    return BoxUnion([Box((0.0,) * (domain.d - 1) + (lo,), (domain.width,) * (domain.d - 1) + (hi,))], domain.d)
