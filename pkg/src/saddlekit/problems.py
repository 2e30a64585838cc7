"""Bilinear saddle-point problems ``min_x max_y f(x) + <F x, y> - g*(y)``.

Besides the constructors for the standard instances, this module provides
:func:`saddle_oracle`, which computes a saddle point of a small instance by
an exact method (a linear solve, or a search over active sets) and certifies
it with the two variational inequalities characterizing saddle points.
"""

import hashlib
import itertools
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import functions as fn
from .linalg import DimensionError, as_matrix, as_vector, spectral_norm

__all__ = [
    "ProblemError",
    "OracleError",
    "SaddleProblem",
    "SaddleCertificate",
    "make_problem",
    "make_counterexample",
    "make_generalized_lasso",
    "make_basis_pursuit",
    "make_quadratic_pair",
    "random_lasso",
    "difference_matrix",
    "saddle_oracle",
    "certify",
    "problem_to_config",
    "problem_from_config",
]

CERTIFICATE_TOL = 1e-7
FEASIBILITY_TOL = 1e-8
MAX_ENUMERATION_DIM = 12


class ProblemError(ValueError):
    pass


class OracleError(ProblemError):
    pass


@dataclass(frozen=True, eq=False)
class SaddleProblem:
    f: fn.ConvexFunction
    gstar: fn.ConvexFunction
    F: np.ndarray
    norm_F: float
    mu: float = 0.0
    config: dict = None

    @property
    def d1(self):
        return self.F.shape[1]

    @property
    def d2(self):
        return self.F.shape[0]

    def phi(self, x, y):
        """Saddle function value ``f(x) + <F x, y> - g*(y)``."""
        x = as_vector(x, "x")
        y = as_vector(y, "y")
        return self.f.eval(x) + float(y @ (self.F @ x)) - self.gstar.eval(y)

    def fingerprint(self):
        blob = json.dumps(problem_to_config(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class SaddleCertificate:
    x_star: np.ndarray
    y_star: np.ndarray
    residual: float


def make_problem(f, gstar, F, config=None):
    """Assemble a problem, computing ``||F||`` and the strong convexity of ``f``."""
    F = as_matrix(F, "F")
    F = np.array(F)
    F.setflags(write=False)
    d2, d1 = F.shape
    if f.dim is not None and f.dim != d1:
        raise DimensionError(f"f has dimension {f.dim} but F has {d1} columns")
    if gstar.dim is not None and gstar.dim != d2:
        raise DimensionError(f"g* has dimension {gstar.dim} but F has {d2} rows")
    mu = f.strong_convexity if isinstance(f, fn.Quadratic) else 0.0
    if config is None:
        config = {"kind": "custom", "f": f.to_dict(), "gstar": gstar.to_dict(),
                  "F": F.tolist()}
    return SaddleProblem(f, gstar, F, spectral_norm(F), mu, config)


def make_counterexample():
    """``Phi(x, y) = x - x y + y`` with unique saddle point ``(1, 1)``."""
    p = make_problem(fn.Linear([1.0]), fn.Linear([-1.0]), [[-1.0]])
    return _with_config(p, {"kind": "counterexample"})


def difference_matrix(n):
    """``(n-1) x n`` forward difference operator, rows ``(..., -1, 1, ...)``."""
    if n < 2:
        raise ProblemError(f"difference matrix needs n >= 2, got {n}")
    D = np.zeros((n - 1, n))
    i = np.arange(n - 1)
    D[i, i] = -1.0
    D[i, i + 1] = 1.0
    return D


def make_generalized_lasso(A, b, lam, F):
    """``min 1/2 ||A x - b||^2 + lam ||F x||_1`` in saddle form."""
    lam = float(lam)
    if not lam > 0:
        raise ProblemError(f"lam must be positive, got {lam}")
    A = as_matrix(A, "A")
    F = as_matrix(F, "F")
    if A.shape[1] != F.shape[1]:
        raise DimensionError(f"A has shape {A.shape} but F has shape {F.shape}")
    f = fn.Quadratic.least_squares(A, b)
    p = make_problem(f, fn.IndicatorLinfBall(lam), F)
    return _with_config(p, {"kind": "generalized_lasso", "A": A.tolist(),
                            "b": as_vector(b).tolist(), "lam": lam, "F": F.tolist()})


def make_basis_pursuit(A, b):
    """``min ||x||_1 s.t. A x = b`` with ``F = I`` and ``g* = indicator of the unit l-inf ball``."""
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    if A.shape[0] != b.shape[0]:
        raise DimensionError(f"A has shape {A.shape} but b has shape {b.shape}")
    x_ls = np.linalg.lstsq(A, b, rcond=None)[0]
    residual = float(np.linalg.norm(A @ x_ls - b))
    if residual > FEASIBILITY_TOL:
        raise ProblemError(f"b is not in the range of A (least-squares residual {residual:.3e})")
    n = A.shape[1]
    p = make_problem(fn.IndicatorAffine(A, b), fn.IndicatorLinfBall(1.0), np.eye(n))
    return _with_config(p, {"kind": "basis_pursuit", "A": A.tolist(), "b": b.tolist()})


def make_quadratic_pair(d1, d2, seed=0):
    """Seeded problem with strongly convex quadratic ``f`` and ``g*`` and Gaussian ``F``."""
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((d1, d1))
    C = rng.standard_normal((d2, d2))
    f = fn.Quadratic(B.T @ B / d1 + 0.5 * np.eye(d1), rng.standard_normal(d1))
    gstar = fn.Quadratic(C.T @ C / d2 + 0.5 * np.eye(d2), rng.standard_normal(d2))
    p = make_problem(f, gstar, rng.standard_normal((d2, d1)))
    return _with_config(p, {"kind": "quadratic_pair", "d1": int(d1), "d2": int(d2),
                            "seed": int(seed)})


def random_lasso(d1, m=None, d2=None, lam=0.5, seed=0, difference=False):
    """Seeded generalized Lasso with Gaussian ``A``, ``b`` and ``F``.

    With ``difference=True`` the coupling is the forward difference operator,
    i.e. a fused Lasso.
    """
    rng = np.random.default_rng(seed)
    m = 2 * d1 if m is None else m
    A = rng.standard_normal((m, d1)) / np.sqrt(m)
    b = rng.standard_normal(m)
    if difference:
        F = difference_matrix(d1)
    else:
        F = rng.standard_normal((d1 if d2 is None else d2, d1))
    return make_generalized_lasso(A, b, lam, F)


def _with_config(p, config):
    return SaddleProblem(p.f, p.gstar, p.F, p.norm_F, p.mu, config)


def problem_to_config(p):
    return json.loads(json.dumps(p.config))


def problem_from_config(cfg):
    """Build a problem from its JSON config (see ``problem_to_config``)."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ProblemError(f"problem config must be an object with a 'kind', got {cfg!r}")
    kind = cfg["kind"]
    keys = set(cfg) - {"kind"}

    def need(*names, optional=()):
        missing = set(names) - keys
        extra = keys - set(names) - set(optional)
        if missing or extra:
            raise ProblemError(
                f"problem kind {kind!r}: missing keys {sorted(missing)}, unknown keys {sorted(extra)}"
            )

    if kind == "counterexample":
        need()
        return make_counterexample()
    if kind == "generalized_lasso":
        need("A", "b", "lam", "F")
        F = cfg["F"]
        n = len(cfg["A"][0])
        if F == "identity":
            F = np.eye(n)
        elif F == "difference":
            F = difference_matrix(n)
        p = make_generalized_lasso(cfg["A"], cfg["b"], cfg["lam"], F)
        return _with_config(p, dict(cfg))
    if kind == "random_lasso":
        need("d1", optional=("m", "d2", "lam", "seed", "difference"))
        p = random_lasso(**{k: cfg[k] for k in keys})
        return _with_config(p, dict(cfg))
    if kind == "basis_pursuit":
        need("A", "b")
        return make_basis_pursuit(cfg["A"], cfg["b"])
    if kind == "quadratic_pair":
        need("d1", "d2", optional=("seed",))
        return make_quadratic_pair(cfg["d1"], cfg["d2"], cfg.get("seed", 0))
    if kind == "custom":
        need("f", "gstar", "F")
        return make_problem(fn.from_dict(cfg["f"]), fn.from_dict(cfg["gstar"]), cfg["F"],
                            config=dict(cfg))
    raise ProblemError(
        f"unknown problem kind {kind!r}; expected counterexample, generalized_lasso, "
        "random_lasso, basis_pursuit, quadratic_pair or custom"
    )


# -- saddle oracles ---------------------------------------------------------


def _probes(p, x_star, y_star, n, seed):
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for _ in range(n):
        x = x_star + rng.uniform(-5, 5, p.d1)
        y = y_star + rng.uniform(-5, 5, p.d2)
        xs.append(x)
        ys.append(y)
        # projected copies keep the indicator cases from passing vacuously
        xs.append(p.f.prox(1.0, x) if not p.f.differentiable else x_star + 1e-3 * (x - x_star))
        ys.append(p.gstar.prox(1.0, y) if not p.gstar.differentiable
                  else y_star + 1e-3 * (y - y_star))
    return xs, ys


def certify(p, x_star, y_star, n_probes=100, seed=0):
    """Check the saddle inequalities on random probes.

    Returns the largest violation of::

        f(x) - f(x*) + <F (x - x*), y*>  >= 0
        g*(y) - g*(y*) - <F x*, y - y*>  >= 0

    (zero when both hold on every probe).
    """
    x_star = as_vector(x_star, "x*")
    y_star = as_vector(y_star, "y*")
    fx = p.f.eval(x_star)
    gy = p.gstar.eval(y_star)
    if not (np.isfinite(fx) and np.isfinite(gy)):
        return np.inf
    Fx = p.F @ x_star
    worst = 0.0
    xs, ys = _probes(p, x_star, y_star, n_probes, seed)
    for x, y in zip(xs, ys):
        first = p.f.eval(x) - fx + float(y_star @ (p.F @ (x - x_star)))
        second = p.gstar.eval(y) - gy - float(Fx @ (y - y_star))
        worst = max(worst, -first, -second)
    return float(worst)


def _certificate(p, x, y):
    residual = certify(p, x, y)
    if not residual <= CERTIFICATE_TOL:
        raise OracleError(f"candidate saddle point failed certification (residual {residual:.3e})")
    return SaddleCertificate(np.asarray(x, float), np.asarray(y, float), residual)


def saddle_oracle(p):
    """Exact saddle point of a small problem, certified by probe tests.

    Supported structures: ``f`` and ``g*`` both with affine gradients
    (quadratic, linear, zero; this includes the counterexample); generalized
    Lasso with ``d2 <= 12``; basis pursuit (via a linear program).
    """
    f, g = p.f, p.gstar
    if f.differentiable and g.differentiable:
        return _certificate(p, *_stationary_point(p))
    if isinstance(f, fn.Quadratic) and isinstance(g, fn.IndicatorLinfBall):
        return _certificate(p, *_lasso_saddle(p))
    if (isinstance(f, fn.IndicatorAffine) and isinstance(g, fn.IndicatorLinfBall)
            and np.array_equal(p.F, np.eye(p.d1))):
        return _certificate(p, *_basis_pursuit_saddle(p))
    raise OracleError(
        f"no saddle oracle for f={f.kind}, g*={g.kind}"
    )


def _stationary_point(p):
    d1, d2 = p.d1, p.d2
    P, q = p.f.affine_gradient(d1)
    Q, r = p.gstar.affine_gradient(d2)
    # grad f(x) + F^T y = 0,  grad g*(y) - F x = 0
    K = np.block([[P, p.F.T], [-p.F, Q]])
    rhs = -np.concatenate([q, r])
    try:
        z = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        raise OracleError("stationarity system is singular; saddle point is not unique") from None
    return z[:d1], z[d1:]


def _lasso_pattern(p, zero, signs):
    """Solve the KKT system for a fixed pattern of ``F x``.

    ``zero`` lists the rows with ``(F x)_i = 0``; the others have sign
    ``signs`` and dual value ``lam * sign``. Returns ``(x, y)`` or ``None``
    when the pattern is inconsistent.
    """
    P, q = p.f.P, p.f.q
    lam = p.gstar.radius
    F = p.F
    mask = np.zeros(p.d2, bool)
    mask[list(zero)] = True
    Fz, Fn = F[mask], F[~mask]
    nz = Fz.shape[0]
    K = np.block([[P, Fz.T], [Fz, np.zeros((nz, nz))]])
    rhs = np.concatenate([-q - lam * (Fn.T @ signs), np.zeros(nz)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    x = sol[:p.d1]
    y = np.empty(p.d2)
    y[mask] = sol[p.d1:]
    y[~mask] = lam * signs
    tol = 1e-9 * max(1.0, lam)
    if np.any(np.abs(y[mask]) > lam + tol):
        return None
    if np.any(signs * (Fn @ x) < -tol):
        return None
    return x, y


def _lasso_dual_iterates(p):
    """Approximate duals, every 25 iterations.

    The dual ``min 1/2 (q + F^T y)^T P^-1 (q + F^T y)`` over the box
    ``|y| <= lam`` is solved by accelerated projected gradient.
    """
    Pinv = np.linalg.inv(p.f.P)
    lam = p.gstar.radius
    F, q = p.F, p.f.q
    H = F @ Pinv @ F.T
    c = F @ Pinv @ q
    L = max(np.linalg.eigvalsh(H).max(), 1e-12)
    y = np.zeros(p.d2)
    z = y.copy()
    t = 1.0
    for it in range(1, 20001):
        y_new = np.clip(z - (H @ z + c) / L, -lam, lam)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = y_new + (t - 1) / t_new * (y_new - y)
        y, t = y_new, t_new
        if it % 25 == 0:
            yield y


def _certified_pattern(p, zero, signs):
    sol = _lasso_pattern(p, zero, signs)
    if sol is not None and certify(p, *sol) <= CERTIFICATE_TOL:
        return sol
    return None


def _lasso_saddle(p):
    """Active-set search: rows whose approximate dual sits on the box boundary
    are signed rows of the pattern. If no guess certifies, every zero set is
    tried with the signs of the last dual (``d2 <= MAX_ENUMERATION_DIM``).
    """
    if np.linalg.matrix_rank(p.f.P) < p.d1:
        raise OracleError("Lasso oracle needs a positive definite quadratic (full column rank A)")
    lam = p.gstar.radius
    seen = set()
    y = np.zeros(p.d2)
    for y in _lasso_dual_iterates(p):
        on_bound = np.abs(np.abs(y) - lam) <= 1e-9 * max(1.0, lam)
        zero = tuple(np.flatnonzero(~on_bound))
        signs = np.sign(y[on_bound])
        if (zero, tuple(signs)) in seen:
            continue
        seen.add((zero, tuple(signs)))
        sol = _certified_pattern(p, zero, signs)
        if sol is not None:
            return sol
    if p.d2 > MAX_ENUMERATION_DIM:
        raise OracleError(f"Lasso active set not identified and d2={p.d2} is too large to enumerate")
    all_signs = np.where(y >= 0, 1.0, -1.0)
    # rows with the smallest |y| are the likeliest zeros
    rows = np.argsort(np.abs(y))
    for size in range(p.d2 + 1):
        for zero in itertools.combinations(rows, size):
            mask = np.ones(p.d2, bool)
            mask[list(zero)] = False
            sol = _certified_pattern(p, tuple(sorted(zero)), all_signs[mask])
            if sol is not None:
                return sol
    raise OracleError("no Lasso active set passed certification")


def _basis_pursuit_saddle(p):
    A, b = p.f.A, p.f.b
    m, n = A.shape
    # x = u - v with u, v >= 0
    res = linprog(np.ones(2 * n), A_eq=np.hstack([A, -A]), b_eq=b,
                  bounds=[(0, None)] * (2 * n), method="highs")
    if res.status != 0:
        raise OracleError(f"basis pursuit linear program failed: {res.message}")
    x = res.x[:n] - res.x[n:]
    nu = res.eqlin.marginals
    # 0 in d||x||_1 + A^T nu' ; the dual variable of the saddle form is y = -A^T nu'
    y = np.clip(A.T @ nu, -1.0, 1.0)
    if certify(p, x, y) > CERTIFICATE_TOL:
        y = -y
    return x, y
