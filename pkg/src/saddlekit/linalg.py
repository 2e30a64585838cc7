"""Small dense linear algebra helpers.

Matrices and vectors are plain numpy ``float64`` arrays; the helpers here only
add validation, a cached Cholesky factorization and a deterministic power
iteration for the spectral norm.
"""

import threading

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "LinalgError",
    "DimensionError",
    "NotSymmetricError",
    "NotPositiveDefiniteError",
    "ConvergenceError",
    "as_matrix",
    "as_vector",
    "matvec",
    "CholeskyFactor",
    "cholesky",
    "solve_spd",
    "spectral_norm",
]

SYMMETRY_TOL = 1e-12
POWER_MAX_ITER = 10_000


class LinalgError(ValueError):
    pass


class DimensionError(LinalgError):
    pass


class NotSymmetricError(LinalgError):
    pass


class NotPositiveDefiniteError(LinalgError):
    def __init__(self, index, pivot):
        super().__init__(f"non-positive pivot {pivot!r} at index {index}")
        self.index = index
        self.pivot = pivot


class ConvergenceError(LinalgError):
    def __init__(self, message, estimate):
        super().__init__(f"{message} (last estimate {estimate!r})")
        self.estimate = estimate


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-d float64 array (a copy is not forced)."""
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-d, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise LinalgError(f"{name} has non-finite entries")
    return A


def as_vector(v, name="vector"):
    a = np.asarray(v, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim != 1:
        raise DimensionError(f"{name} must be 1-d, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise LinalgError(f"{name} has non-finite entries")
    return a


def matvec(M, v):
    M = np.asarray(M, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if M.ndim != 2 or v.ndim != 1 or M.shape[1] != v.shape[0]:
        raise DimensionError(
            f"cannot multiply matrix of shape {M.shape} by vector of shape {v.shape}"
        )
    return M @ v


class CholeskyFactor:
    """Lower-triangular factor ``L`` with ``M = L L^T``.

    Build with :func:`cholesky`. Solves are read-only on the factor, so one
    instance can be shared between threads.
    """

    def __init__(self, L):
        self.L = L
        self.n = L.shape[0]

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise DimensionError(
                f"factor of order {self.n} cannot solve right-hand side of shape {b.shape}"
            )
        z = solve_triangular(self.L, b, lower=True, check_finite=False)
        return solve_triangular(self.L.T, z, lower=False, check_finite=False)


def cholesky(M):
    """Factor a symmetric positive definite matrix.

    Raises :class:`NotSymmetricError` when ``max |M_ij - M_ji| > 1e-12`` and
    :class:`NotPositiveDefiniteError` naming the first non-positive pivot.
    """
    M = as_matrix(M)
    n, m = M.shape
    if n != m:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    asym = np.max(np.abs(M - M.T)) if n else 0.0
    if asym > SYMMETRY_TOL:
        raise NotSymmetricError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    L = np.zeros_like(M)
    for j in range(n):
        pivot = M[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 0.0:
            raise NotPositiveDefiniteError(j, float(pivot))
        L[j, j] = np.sqrt(pivot)
        L[j + 1:, j] = (M[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return CholeskyFactor(L)


_factor_cache = {}
_factor_lock = threading.Lock()


def _cached_factor(M):
    # keyed on the bytes so equal matrices built separately share a factor
    key = (M.shape, M.tobytes())
    factor = _factor_cache.get(key)
    if factor is None:
        factor = cholesky(M)
        with _factor_lock:
            if len(_factor_cache) > 256:
                _factor_cache.clear()
            _factor_cache[key] = factor
    return factor


def solve_spd(M, b):
    """Solve ``M x = b`` for symmetric positive definite ``M``.

    The factorization is cached, so repeated solves with the same matrix (the
    usual case inside an iterative solver) only pay for two triangular solves.
    """
    M = as_matrix(M)
    b = as_vector(b, "right-hand side")
    if M.shape[0] != M.shape[1] or M.shape[0] != b.shape[0]:
        raise DimensionError(
            f"cannot solve system with matrix of shape {M.shape} and right-hand side "
            f"of shape {b.shape}"
        )
    return _cached_factor(M).solve(b)


def spectral_norm(F, tol=1e-10):
    """Largest singular value of ``F`` by power iteration on ``F^T F``.

    Two fixed start vectors are used, the normalized all-ones vector and a
    seeded Gaussian draw, and the larger estimate is kept. The result is
    reproducible, and a start vector that is exactly orthogonal to the top
    singular direction cannot hide it.
    """
    F = as_matrix(F)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if F.size == 0 or not np.any(F):
        return 0.0
    G = F.T @ F
    n = G.shape[0]
    starts = [np.ones(n) / np.sqrt(n)]
    starts.append(np.random.default_rng(0).standard_normal(n))
    best = 0.0
    for v in starts:
        v = v / np.linalg.norm(v)
        lam = 0.0
        for _ in range(POWER_MAX_ITER):
            w = G @ v
            nw = np.linalg.norm(w)
            if nw == 0.0:
                lam = 0.0
                break
            lam_new = float(v @ w)
            # eigenvalue stagnation alone can stop early on a small spectral gap
            resid = np.linalg.norm(w - lam_new * v)
            v = w / nw
            if (abs(lam_new - lam) <= tol * abs(lam_new)
                    and resid <= tol ** 0.75 * abs(lam_new)):
                lam = lam_new
                break
            lam = lam_new
        else:
            raise ConvergenceError("power iteration did not converge", np.sqrt(max(lam, 0.0)))
        best = max(best, lam)
    return float(np.sqrt(best))
