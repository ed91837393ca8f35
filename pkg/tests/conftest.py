import sys
import math

import numpy as np
import pytest
from hypothesis import settings

from splinemove.domains import build_annulus, rotating_square_preset

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def cox_de_boor(t, p, i, u):
    """Textbook recursion with the right-closed convention at the last knot."""
    t = np.asarray(t, dtype=float)
    if p == 0:
        if t[i] <= u < t[i + 1]:
            return 1.0
        last = np.flatnonzero(t < t[-1]).max()
        return 1.0 if (u == t[-1] and i == last) else 0.0
    out = 0.0
    if t[i + p] > t[i]:
        out += (u - t[i]) / (t[i + p] - t[i]) * cox_de_boor(t, p - 1, i, u)
    if t[i + p + 1] > t[i + 1]:
        out += (t[i + p + 1] - u) / (t[i + p + 1] - t[i + 1]) * cox_de_boor(t, p - 1, i + 1, u)
    return out


@pytest.fixture(scope="session")
def square_spec():
    return rotating_square_preset()


@pytest.fixture(scope="session")
def square_ref(square_spec):
    """No-slip barrier mesh at zero rotation: the reference for the classical movers."""
    return build_annulus(square_spec, 0.0, slip=False).domain


@pytest.fixture(scope="session")
def slip_sequence(square_spec):
    return [build_annulus(square_spec, math.radians(2.25 * k)).domain for k in range(4)]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
