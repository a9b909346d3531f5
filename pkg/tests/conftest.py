import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cudbound.dataset import Dataset

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# acceptance criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def separable():
    """Two well-separated clusters on the first axis."""
    r = np.random.default_rng(5)
    X = np.vstack([r.normal([-4, 0], 0.5, (15, 2)), r.normal([4, 0], 0.5, (15, 2))])
    y = np.r_[-np.ones(15, int), np.ones(15, int)]
    return Dataset(X, y)


def random_instance(r, n, p_kind="line"):
    """Random design (with intercept), labels with both classes, and the unweighted fit."""
    from cudbound.model import fit_least_squares

    if p_kind == "line":
        X = np.column_stack([np.ones(n), r.normal(size=n)])
    elif p_kind == "plane":
        X = np.column_stack([np.ones(n), r.normal(size=(n, 2))])
    else:
        x = r.choice([-1.0, 0.0, 1.0], size=n)
        X = np.column_stack([np.ones(n), x])
    y = np.where(r.random(n) < 0.5, 1, -1)
    y[0], y[1] = 1, -1
    return X, y, fit_least_squares(X, y)
