import numpy as np
import pytest

from saddlekit import functions as fn


def random_descriptor(rng, kind, n):
    """Seeded descriptor of the given kind on R^n (used by property tests)."""
    if kind == "quadratic":
        B = rng.standard_normal((n, n))
        return fn.Quadratic(B @ B.T / n + 0.1 * np.eye(n), rng.standard_normal(n), rng.standard_normal())
    if kind == "least_squares":
        m = int(rng.integers(1, n + 3))
        return fn.Quadratic.least_squares(rng.standard_normal((m, n)), rng.standard_normal(m))
    if kind == "scaled_l1":
        return fn.ScaledL1(rng.uniform(0, 3))
    if kind == "ball":
        return fn.IndicatorLinfBall(rng.uniform(0, 3))
    if kind == "linear":
        return fn.Linear(rng.standard_normal(n))
    if kind == "affine":
        m = int(rng.integers(1, n + 1))
        A = rng.standard_normal((m, n))
        return fn.IndicatorAffine(A, A @ rng.standard_normal(n))
    if kind == "zero":
        return fn.Zero()
    raise ValueError(kind)


KINDS = ("quadratic", "least_squares", "scaled_l1", "ball", "linear", "affine", "zero")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
