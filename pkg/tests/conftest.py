import numpy as np
import pytest

from linfsynth.model import validate_panel

ACCEPTANCE = {}


def record_criterion(n, passed, detail):
    ACCEPTANCE[n] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_panel(rng, T=40, J=5, t0=30, scale=1.0):
    F = rng.standard_normal((T, 2))
    L = rng.uniform(0.2, 1.0, (2, J))
    Y = 10 + F @ L * 3 + rng.standard_normal((T, J)) * scale
    w = rng.uniform(-0.3, 0.6, J)
    y = 2.0 + Y @ w + rng.standard_normal(T) * 0.5 * scale
    return validate_panel(np.column_stack([y, Y]), t0)


@pytest.fixture
def panel(rng):
    return random_panel(rng)
