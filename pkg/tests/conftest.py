import math

import numpy as np
import pytest

from geoclose import Ellipsoid, SpectralCurve, admissible_intervals
from geoclose.errors import GeocloseError

E3 = Ellipsoid((3.0, 2.0, 1.0))
E4 = Ellipsoid((4.0, 3.0, 2.0, 1.0))

# point on Q0 and a tangent direction there
X0 = np.array([1.0, 1.0, 1.0 / math.sqrt(6.0)])
Y0 = np.array([3.0, -2.0, 0.0]) / math.sqrt(13.0)


def random_tangent_line(e, rng):
    """Uniform-ish point on the surface and a random unit tangent."""
    x = rng.normal(size=e.d) * np.sqrt(e.axes)
    x /= math.sqrt(np.sum(x**2 / e.axes))
    n = x / e.axes
    y = rng.normal(size=e.d)
    y -= n * (y @ n) / (n @ n)
    return x, y / np.linalg.norm(y)


def random_curve(rng, d, min_gap=0.02):
    """Random semi-axes in (0.5, 6) and one caustic in each of d-2 distinct slabs."""
    while True:
        a = np.sort(rng.uniform(0.5, 6.0, size=d))[::-1]
        if np.min(-np.diff(a)) < 0.2:
            continue
        slabs = rng.choice(d - 1, size=d - 2, replace=False)
        al = [rng.uniform(a[s + 1], a[s]) for s in slabs]
        try:
            c = SpectralCurve(Ellipsoid(tuple(a)), tuple(al))
            admissible_intervals(c)
        except GeocloseError:
            continue
        if np.min(np.diff(c.branch_points)) > min_gap:
            return c


@pytest.fixture
def e3():
    return E3


@pytest.fixture
def e4():
    return E4


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
