import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from saddlekit import functions as fn
from saddlekit.linalg import DimensionError

from conftest import KINDS, random_descriptor

seeds = st.integers(0, 2**32 - 1)


# -- evaluation ---------------------------------------------------------------

def test_eval_examples():
    assert fn.evaluate(fn.ScaledL1(2.0), [1.0, -3.0]) == 8.0
    assert fn.evaluate(fn.Quadratic.least_squares(np.eye(2), [1.0, 1.0]), [0.0, 0.0]) == 1.0
    assert fn.evaluate(fn.IndicatorLinfBall(1.0), [0.5, -1.5]) == np.inf


def test_indicator_slack():
    ball = fn.IndicatorLinfBall(1.0)
    assert ball.eval([1.0 + 5e-10]) == 0.0
    assert ball.eval([1.0 + 1e-8]) == np.inf
    aff = fn.IndicatorAffine([[1.0, 1.0]], [1.0])
    assert aff.eval([0.5, 0.5 + 5e-10]) == 0.0
    assert aff.eval([0.5, 0.6]) == np.inf


def test_eval_dimension_mismatch():
    with pytest.raises(DimensionError):
        fn.Linear([1.0, 2.0]).eval([1.0])
    with pytest.raises(DimensionError):
        fn.Quadratic(np.eye(3)).prox(1.0, [1.0, 2.0])


def test_eval_rows_matches_eval(rng):
    for kind in KINDS:
        d = random_descriptor(rng, kind, 4)
        V = rng.standard_normal((7, 4))
        V[0] = d.prox(1.0, V[0])
        npt.assert_allclose(d.eval_rows(V), [d.eval(v) for v in V], rtol=1e-12, atol=1e-12)


def test_quadratic_rejects_nonsymmetric_and_indefinite():
    with pytest.raises(fn.FunctionError):
        fn.Quadratic([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(fn.FunctionError):
        fn.Quadratic(np.diag([1.0, -1.0]))


def test_negative_parameters_rejected():
    with pytest.raises(fn.FunctionError):
        fn.ScaledL1(-1.0)
    with pytest.raises(fn.FunctionError):
        fn.IndicatorLinfBall(-0.5)


# -- conjugates -----------------------------------------------------------------

def test_conjugate_pairs():
    ball = fn.conjugate(fn.ScaledL1(0.7))
    assert isinstance(ball, fn.IndicatorLinfBall) and ball.radius == 0.7
    c = np.array([1.0, -2.0])
    aff = fn.conjugate(fn.Linear(c))
    assert isinstance(aff, fn.IndicatorAffine)
    assert aff.eval(c) == 0.0 and aff.eval(c + 0.1) == np.inf
    half = fn.Quadratic(np.eye(3))
    conj = fn.conjugate(half)
    npt.assert_allclose(conj.P, np.eye(3))
    npt.assert_allclose(conj.q, 0.0)
    assert conj.const == 0.0


def test_conjugate_round_trip(rng):
    l1 = fn.ScaledL1(1.3)
    back = l1.conjugate().conjugate()
    assert isinstance(back, fn.ScaledL1) and back.lam == 1.3
    lin = fn.Linear([0.5, -1.0])
    back = lin.conjugate().conjugate()
    assert isinstance(back, fn.Linear)
    npt.assert_allclose(back.c, lin.c)
    q = random_descriptor(rng, "quadratic", 3)
    back = q.conjugate().conjugate()
    npt.assert_allclose(back.P, q.P, rtol=1e-10)
    npt.assert_allclose(back.q, q.q, rtol=1e-10, atol=1e-12)
    npt.assert_allclose(back.const, q.const, rtol=1e-10, atol=1e-12)


def test_conjugate_unsupported():
    with pytest.raises(fn.UnsupportedOperation, match="manually"):
        fn.Quadratic(np.diag([1.0, 0.0])).conjugate()
    with pytest.raises(fn.UnsupportedOperation, match="manually"):
        fn.IndicatorAffine([[1.0, 1.0]], [1.0]).conjugate()


def test_l1_conjugate_by_grid_sup():
    # sup over a box of <y, x> - lam ||x||_1 is 0 inside the ball and grows with the box outside
    lam = 0.8
    g = np.linspace(-5, 5, 201)
    X = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    vals = -lam * np.abs(X).sum(1)
    ball = fn.IndicatorLinfBall(lam)
    for y in ([0.3, -0.8], [0.0, 0.0], [0.9, 0.1], [-2.0, 0.5]):
        sup = np.max(X @ np.array(y) + vals)
        if ball.eval(y) == 0.0:
            assert abs(sup) < 1e-12
        else:
            assert sup > 0.4


def test_quadratic_conjugate_against_optimizer(rng):
    q = random_descriptor(rng, "quadratic", 3)
    conj = q.conjugate()
    for _ in range(5):
        y = rng.standard_normal(3)
        res = minimize(lambda x: q.eval(x) - y @ x, np.zeros(3), jac=lambda x: q.gradient(x) - y,
                       method="BFGS", options={"gtol": 1e-12})
        npt.assert_allclose(conj.eval(y), -res.fun, rtol=1e-8, atol=1e-8)


# -- prox -----------------------------------------------------------------------

def test_prox_examples():
    npt.assert_array_equal(fn.prox(fn.ScaledL1(1.0), 1.0, [2.0, -0.5, 0.0]), [1.0, 0.0, 0.0])
    npt.assert_allclose(fn.prox(fn.ScaledL1(1.0), 1e-12, [2.0, -2.0]), [2.0, -2.0], atol=1e-6)
    lsq = fn.Quadratic.least_squares([[1.0, 0.0], [0.0, 2.0]], [1.0, 2.0])
    npt.assert_allclose(fn.prox(lsq, 1.0, [0.0, 0.0]), [0.5, 0.8], rtol=1e-14)
    for step in (0.1, 1.0, 7.0):
        npt.assert_array_equal(fn.prox(fn.IndicatorLinfBall(1.0), step, [3.0, -0.2]), [1.0, -0.2])


def test_soft_threshold_ties_are_zero():
    out = fn.soft_threshold(np.array([1.0, -1.0, 1.5]), 1.0)
    npt.assert_array_equal(out, [0.0, 0.0, 0.5])
    assert not np.signbit(out[1])


def test_prox_step_validation():
    for bad in (0.0, -1.0, np.inf, np.nan):
        with pytest.raises(fn.FunctionError):
            fn.prox(fn.Zero(), bad, [1.0])


def test_affine_projection_and_linear_prox():
    aff = fn.IndicatorAffine([[1.0, 1.0]], [2.0])
    npt.assert_allclose(aff.prox(3.0, [0.0, 0.0]), [1.0, 1.0])
    npt.assert_allclose(fn.Linear([1.0, -1.0]).prox(0.5, [0.0, 0.0]), [-0.5, 0.5])
    npt.assert_array_equal(fn.Zero().prox(2.0, [4.0, 5.0]), [4.0, 5.0])


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(KINDS), st.integers(1, 10), seeds, st.floats(1e-3, 10.0))
def test_prox_firmly_nonexpansive(kind, n, seed, step):
    rng = np.random.default_rng(seed)
    d = random_descriptor(rng, kind, n)
    u, v = 3 * rng.standard_normal(n), 3 * rng.standard_normal(n)
    pu, pv = d.prox(step, u), d.prox(step, v)
    diff = pu - pv
    assert diff @ diff <= diff @ (u - v) + 1e-9 * (1 + np.abs(u - v).sum() ** 2)
    assert np.linalg.norm(diff) <= np.linalg.norm(u - v) + 1e-9


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(("scaled_l1", "ball", "quadratic", "linear")), st.integers(1, 10), seeds,
       st.floats(1e-2, 10.0))
def test_moreau_identity(kind, n, seed, step):
    rng = np.random.default_rng(seed)
    d = random_descriptor(rng, kind, n)
    v = 3 * rng.standard_normal(n)
    lhs = d.prox(step, v) + step * d.conjugate().prox(1.0 / step, v / step)
    npt.assert_allclose(lhs, v, rtol=0, atol=1e-9 * (1 + np.abs(v).max()) * max(1.0, step))


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(("quadratic", "least_squares", "linear", "zero")), st.integers(1, 6), seeds,
       st.floats(1e-2, 5.0))
def test_prox_optimality_by_finite_differences(kind, n, seed, step):
    rng = np.random.default_rng(seed)
    d = random_descriptor(rng, kind, n)
    v = rng.standard_normal(n)
    u = d.prox(step, v)

    def objective(w):
        return d.eval(w) + (w - v) @ (w - v) / (2 * step)

    h = 1e-5
    grad = np.array([(objective(u + h * e) - objective(u - h * e)) / (2 * h) for e in np.eye(n)])
    assert np.linalg.norm(grad) <= 1e-8 * (1 + abs(objective(u)))


def grid_prox(d, step, v, lo=-5.0, hi=5.0):
    """Brute-force argmin over a 1e-3 grid of [lo, hi]^2 (coarse pass, then a local 1e-3 pass)."""
    def best(g1, g2):
        U = np.stack(np.meshgrid(g1, g2, indexing="ij"), -1).reshape(-1, 2)
        obj = d.eval_rows(U) + np.sum((U - v) ** 2, 1) / (2 * step)
        return U[np.argmin(obj)]

    coarse = best(np.linspace(lo, hi, 1001), np.linspace(lo, hi, 1001))
    fine = [np.clip(np.round(np.arange(c - 0.03, c + 0.03 + 1e-12, 1e-3), 12), lo, hi) for c in coarse]
    return best(*fine)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(("quadratic", "least_squares", "scaled_l1", "ball", "linear", "zero")), seeds,
       st.floats(0.1, 3.0))
def test_prox_matches_grid_oracle_2d(kind, seed, step):
    rng = np.random.default_rng(seed)
    d = random_descriptor(rng, kind, 2)
    if kind == "ball":
        d = fn.IndicatorLinfBall(round(float(d.radius), 3))
    v = rng.uniform(-3, 3, 2)
    exact = d.prox(step, v)
    if np.abs(exact).max() > 4.9:
        return
    npt.assert_allclose(grid_prox(d, step, v), exact, atol=2e-3)


def test_from_dict_round_trip(rng):
    for kind in KINDS:
        d = random_descriptor(rng, kind, 3)
        back = fn.from_dict(d.to_dict())
        assert back.kind == d.kind
        V = rng.standard_normal((4, 3))
        V[0] = d.prox(1.0, V[0])
        npt.assert_allclose(back.eval_rows(V), d.eval_rows(V), rtol=1e-12)


def test_from_dict_validation():
    with pytest.raises(fn.FunctionError, match="unknown"):
        fn.from_dict({"kind": "huber"})
    with pytest.raises(fn.FunctionError):
        fn.from_dict({"kind": "scaled_l1", "lam": 1.0, "extra": 2})
    q = fn.from_dict({"kind": "quadratic", "A": [[1.0, 0.0], [0.0, 2.0]], "b": [1.0, 2.0]})
    npt.assert_allclose(q.prox(1.0, [0.0, 0.0]), [0.5, 0.8])
