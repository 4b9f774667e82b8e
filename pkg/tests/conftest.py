import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from sublinear.core import MeasureFamily

settings.register_profile(
    "default", max_examples=100, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

COIN_ROWS = [[0.7, 0.3], [0.3, 0.7]]      # outcome 0 / outcome 1
COIN_X = np.array([-1.0, 1.0])            # X(w) = 2w - 1
MEAN_ZERO_ROWS = [[0.5, 0.0, 0.5], [0.0, 1.0, 0.0]]
MEAN_ZERO_X = np.array([-1.0, 0.0, 1.0])


@pytest.fixture
def coin():
    return MeasureFamily.from_probabilities(COIN_ROWS)


@pytest.fixture
def mean_zero():
    return MeasureFamily.from_probabilities(MEAN_ZERO_ROWS)


@pytest.fixture
def fair():
    return MeasureFamily.singleton([0.5, 0.5])


@st.composite
def families(draw, min_outcomes=1, max_outcomes=8, max_measures=5):
    """Measure families with some exact zeros and point masses."""
    n = draw(st.integers(min_outcomes, max_outcomes))
    k = draw(st.integers(1, max_measures))
    weights = draw(hnp.arrays(float, (k, n), elements=st.floats(0, 1)))
    point = draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k))
    rows = []
    for w, j in zip(weights, point):
        if w.sum() < 1e-3:
            w = np.zeros(n)
            w[j] = 1.0
        rows.append(w / w.sum())
    return MeasureFamily.from_probabilities(rows)


def variables(n, bound=10.0):
    return hnp.arrays(float, n, elements=st.floats(-bound, bound))


@st.composite
def family_and_variables(draw, count=1, **kw):
    fam = draw(families(**kw))
    xs = [draw(variables(fam.n_outcomes)) for _ in range(count)]
    return (fam, *xs)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
