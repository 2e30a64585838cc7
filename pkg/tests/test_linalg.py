import threading

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from saddlekit import linalg
from saddlekit.linalg import (
    ConvergenceError,
    DimensionError,
    NotPositiveDefiniteError,
    NotSymmetricError,
    cholesky,
    matvec,
    solve_spd,
    spectral_norm,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("M, v, expected", [
    (np.eye(3), [1, 2, 3], [1, 2, 3]),
    ([[-1.0]], [2.0], [-2.0]),
    ([[1, 0], [0, 2]], [3, 4], [3, 8]),
])
def test_matvec_examples(M, v, expected):
    npt.assert_array_equal(matvec(M, v), expected)


def test_matvec_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2,\)"):
        matvec(np.ones((2, 3)), np.ones(2))


@given(arrays(float, (4, 3), elements=finite), arrays(float, 3, elements=finite),
       arrays(float, 3, elements=finite), finite, finite)
def test_matvec_linear(M, u, v, a, b):
    lhs = matvec(M, a * u + b * v)
    rhs = a * matvec(M, u) + b * matvec(M, v)
    npt.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(M).sum() * 200))


@pytest.mark.parametrize("M, b, expected", [
    (np.eye(2), [5, -1], [5, -1]),
    ([[2, 0], [0, 5]], [1, 4], [0.5, 0.8]),
    ([[2, 1], [1, 2]], [3, 3], [1, 1]),
])
def test_solve_spd_examples(M, b, expected):
    npt.assert_allclose(solve_spd(M, b), expected, rtol=0, atol=1e-14)


def test_solve_spd_rejects_nonsymmetric():
    with pytest.raises(NotSymmetricError):
        solve_spd([[1.0, 0.5], [0.0, 1.0]], [1.0, 1.0])


def test_cholesky_names_pivot():
    M = np.diag([1.0, 2.0, -1.0])
    with pytest.raises(NotPositiveDefiniteError) as info:
        cholesky(M)
    assert info.value.index == 2


def test_cholesky_factor_reproduces_matrix():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((6, 6))
    M = B @ B.T + 6 * np.eye(6)
    L = cholesky(M).L
    npt.assert_allclose(L @ L.T, M, rtol=1e-13)
    npt.assert_array_equal(L, np.tril(L))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 50), st.integers(0, 2**31 - 1))
def test_solve_spd_residual(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    M = B @ B.T + 0.1 * np.eye(n)
    b = rng.standard_normal(n)
    x = solve_spd(M, b)
    assert np.linalg.norm(M @ x - b) <= 1e-10 * (1 + np.linalg.norm(b))


def test_solve_spd_cache_reused_and_thread_safe():
    M = np.array([[4.0, 1.0], [1.0, 3.0]])
    first = linalg.solve_spd(M, [1.0, 2.0])
    results = []

    def work():
        results.append(linalg.solve_spd(M.copy(), [1.0, 2.0]))

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for r in results:
        npt.assert_array_equal(r, first)


@pytest.mark.parametrize("F, expected", [
    ([[-1.0]], 1.0),
    ([[-1.0, 1.0]], np.sqrt(2.0)),
    (np.diag([3.0, 1.0]), 3.0),
])
def test_spectral_norm_examples(F, expected):
    npt.assert_allclose(spectral_norm(F), expected, rtol=1e-10)


def test_spectral_norm_zero_matrix():
    assert spectral_norm(np.zeros((3, 2))) == 0.0


def test_spectral_norm_start_orthogonal_to_top_vector():
    # F^T F = [[2, -1], [-1, 2]]: the all-ones start lies in the small eigenspace
    F = np.array([[1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    npt.assert_allclose(spectral_norm(F), np.sqrt(3.0), rtol=1e-10)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**31 - 1))
def test_spectral_norm_matches_eigen(m, n, seed):
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((m, n))
    exact = np.sqrt(np.linalg.eigvalsh(F.T @ F).max())
    got = spectral_norm(F)
    npt.assert_allclose(got, exact, rtol=1e-8)
    v = rng.standard_normal(n)
    assert got >= np.linalg.norm(F @ v) / np.linalg.norm(v) * (1 - 1e-12)


def test_spectral_norm_iteration_cap():
    # equal top eigenvalues with an almost equal third one converge slowly
    F = np.diag([1.0, 1.0 - 1e-9, 1.0 - 2e-9])
    F[0, 1] = 1e-5
    with pytest.raises(ConvergenceError) as info:
        spectral_norm(F, tol=1e-300)
    assert np.isfinite(info.value.estimate)
