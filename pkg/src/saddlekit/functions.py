"""Prox-friendly convex functions.

Each descriptor knows how to evaluate itself, build its convex conjugate and
apply its proximal map in closed form::

    prox_{s d}(v) = argmin_u  d(u) + ||u - v||^2 / (2 s)

The catalog is deliberately small: quadratics (including least squares),
scaled l1 norms, linear functions, indicators of l-infinity balls and of
affine sets, and the zero function. That covers the generalized Lasso,
basis pursuit and the bilinear counterexample.
"""

import threading

import numpy as np

from .linalg import DimensionError, as_matrix, as_vector, solve_spd

__all__ = [
    "FunctionError",
    "UnsupportedOperation",
    "ConvexFunction",
    "Quadratic",
    "ScaledL1",
    "Linear",
    "IndicatorLinfBall",
    "IndicatorAffine",
    "Zero",
    "evaluate",
    "conjugate",
    "prox",
    "soft_threshold",
    "from_dict",
    "INDICATOR_SLACK",
]

INDICATOR_SLACK = 1e-9
PSD_TOL = 1e-10


class FunctionError(ValueError):
    pass


class UnsupportedOperation(FunctionError):
    pass


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def soft_threshold(v, t):
    """Componentwise ``sign(v) * max(|v| - t, 0)``; ties at ``|v| == t`` give 0."""
    v = np.asarray(v, dtype=np.float64)
    out = np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
    out[np.abs(v) <= t] = 0.0
    return out


class ConvexFunction:
    """Base class for descriptors.

    ``dim`` is ``None`` for kinds that apply componentwise to any dimension.
    """

    kind = None
    dim = None
    differentiable = False

    def _check(self, v):
        v = as_vector(v, "point")
        if self.dim is not None and v.shape[0] != self.dim:
            raise DimensionError(
                f"{self.kind} of dimension {self.dim} applied to point of dimension {v.shape[0]}"
            )
        return v

    def __call__(self, v):
        return self.eval(v)

    def eval(self, v):
        raise NotImplementedError

    def eval_rows(self, V):
        """``eval`` of every row of the 2-d array ``V``."""
        return np.array([self.eval(v) for v in V], dtype=float)

    def prox(self, step, v):
        """``argmin_u f(u) + ||u - v||^2 / (2 step)``."""
        return self.prox_unchecked(step, self._check(v))

    def prox_unchecked(self, step, v):
        """:meth:`prox` for a point already known to be a finite vector of the right size."""
        raise NotImplementedError

    def conjugate(self):
        raise UnsupportedOperation(
            f"no closed-form conjugate for {self.kind}; specify the conjugate descriptor manually"
        )

    def gradient(self, v):
        raise UnsupportedOperation(f"{self.kind} is not differentiable")

    def affine_gradient(self, dim):
        """Return ``(P, q)`` with ``gradient(v) == P @ v + q`` for every ``v``."""
        raise UnsupportedOperation(f"{self.kind} does not have an affine gradient")

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        fields = ", ".join(f"{k}={v!r}" for k, v in self.to_dict().items() if k != "kind")
        return f"{type(self).__name__}({fields})"


class Quadratic(ConvexFunction):
    """``1/2 x^T P x + q^T x + const`` with symmetric PSD ``P``.

    Use :meth:`least_squares` for ``1/2 ||A x - b||^2``; the ``A``, ``b`` form
    is kept for evaluation and serialization.
    """

    kind = "quadratic"
    differentiable = True

    def __init__(self, P, q=None, const=0.0):
        P = as_matrix(P, "P")
        n = P.shape[0]
        if P.shape != (n, n):
            raise DimensionError(f"P must be square, got shape {P.shape}")
        if n and np.max(np.abs(P - P.T)) > PSD_TOL:
            raise FunctionError("P must be symmetric")
        if n and np.linalg.eigvalsh(P).min() < -PSD_TOL * max(1.0, np.abs(P).max()):
            raise FunctionError("P must be positive semidefinite")
        q = np.zeros(n) if q is None else as_vector(q, "q")
        if q.shape != (n,):
            raise DimensionError(f"q has shape {q.shape}, expected ({n},)")
        self.P = _frozen(P)
        self.q = _frozen(q)
        self.const = float(const)
        self.A = None
        self.b = None
        self.dim = n
        self._prox_mats = {}
        self._lock = threading.Lock()

    @classmethod
    def least_squares(cls, A, b):
        A = as_matrix(A, "A")
        b = as_vector(b, "b")
        if A.shape[0] != b.shape[0]:
            raise DimensionError(f"A has shape {A.shape} but b has shape {b.shape}")
        obj = cls(A.T @ A, -(A.T @ b), 0.5 * float(b @ b))
        obj.A = _frozen(A)
        obj.b = _frozen(b)
        return obj

    @property
    def strong_convexity(self):
        if self.dim == 0:
            return 0.0
        return max(float(np.linalg.eigvalsh(self.P).min()), 0.0)

    def eval(self, v):
        v = self._check(v)
        if self.A is not None:
            r = self.A @ v - self.b
            return 0.5 * float(r @ r)
        return 0.5 * float(v @ self.P @ v) + float(self.q @ v) + self.const

    def eval_rows(self, V):
        V = np.asarray(V, float)
        if self.A is not None:
            R = V @ self.A.T - self.b
            return 0.5 * np.einsum("ki,ki->k", R, R)
        return 0.5 * np.einsum("ki,ki->k", V @ self.P, V) + V @ self.q + self.const

    def gradient(self, v):
        v = self._check(v)
        return self.P @ v + self.q

    def affine_gradient(self, dim):
        if dim != self.dim:
            raise DimensionError(f"quadratic has dimension {self.dim}, not {dim}")
        return np.array(self.P), np.array(self.q)

    def _system(self, step):
        M = self._prox_mats.get(step)
        if M is None:
            M = step * self.P + np.eye(self.dim)
            # symmetrize so rounding in P never trips the symmetry check
            M = 0.5 * (M + M.T)
            M.setflags(write=False)
            with self._lock:
                self._prox_mats[step] = M
        return M

    def prox_unchecked(self, step, v):
        return solve_spd(self._system(step), v - step * self.q)

    def conjugate(self):
        try:
            if self.dim == 0:
                raise np.linalg.LinAlgError
            w = np.linalg.eigvalsh(self.P)
            if w.min() <= PSD_TOL * max(1.0, w.max()):
                raise np.linalg.LinAlgError
            Pinv = np.linalg.inv(self.P)
        except np.linalg.LinAlgError:
            raise UnsupportedOperation(
                "conjugate of a quadratic with singular curvature is an extended-valued "
                "function outside the catalog; specify the conjugate descriptor manually"
            ) from None
        Pinv = 0.5 * (Pinv + Pinv.T)
        z = Pinv @ self.q
        return Quadratic(Pinv, -z, 0.5 * float(self.q @ z) - self.const)

    def to_dict(self):
        if self.A is not None:
            return {"kind": self.kind, "A": self.A.tolist(), "b": self.b.tolist()}
        return {"kind": self.kind, "P": self.P.tolist(), "q": self.q.tolist(),
                "const": self.const}


class ScaledL1(ConvexFunction):
    """``lam * ||x||_1``."""

    kind = "scaled_l1"

    def __init__(self, lam):
        lam = float(lam)
        if not lam >= 0.0 or not np.isfinite(lam):
            raise FunctionError(f"lam must be a finite nonnegative number, got {lam}")
        self.lam = lam

    def eval(self, v):
        v = self._check(v)
        return self.lam * float(np.abs(v).sum())

    def eval_rows(self, V):
        return self.lam * np.abs(np.asarray(V, float)).sum(axis=1)

    def prox_unchecked(self, step, v):
        return soft_threshold(v, step * self.lam)

    def conjugate(self):
        return IndicatorLinfBall(self.lam)

    def to_dict(self):
        return {"kind": self.kind, "lam": self.lam}


class IndicatorLinfBall(ConvexFunction):
    """Indicator of ``{x : max_i |x_i| <= radius}``."""

    kind = "indicator_linf_ball"

    def __init__(self, radius):
        radius = float(radius)
        if not radius >= 0.0 or not np.isfinite(radius):
            raise FunctionError(f"radius must be a finite nonnegative number, got {radius}")
        self.radius = radius

    def eval(self, v):
        v = self._check(v)
        if v.size and np.abs(v).max() > self.radius + INDICATOR_SLACK:
            return np.inf
        return 0.0

    def eval_rows(self, V):
        V = np.asarray(V, float)
        out = np.zeros(V.shape[0])
        if V.shape[1]:
            out[np.abs(V).max(axis=1) > self.radius + INDICATOR_SLACK] = np.inf
        return out

    def prox_unchecked(self, step, v):
        return np.clip(v, -self.radius, self.radius)

    def conjugate(self):
        return ScaledL1(self.radius)

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius}


class Linear(ConvexFunction):
    """``<c, x>``."""

    kind = "linear"
    differentiable = True

    def __init__(self, c):
        self.c = _frozen(as_vector(c, "c"))
        self.dim = self.c.shape[0]

    def eval(self, v):
        v = self._check(v)
        return float(self.c @ v)

    def eval_rows(self, V):
        return np.asarray(V, float) @ self.c

    def gradient(self, v):
        self._check(v)
        return np.array(self.c)

    def affine_gradient(self, dim):
        if dim != self.dim:
            raise DimensionError(f"linear function has dimension {self.dim}, not {dim}")
        return np.zeros((dim, dim)), np.array(self.c)

    def prox_unchecked(self, step, v):
        return v - step * self.c

    def conjugate(self):
        # sup_x <y - c, x> is 0 at y = c and +inf elsewhere
        return IndicatorAffine(np.eye(self.dim), self.c)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c.tolist()}


class IndicatorAffine(ConvexFunction):
    """Indicator of ``{x : A x = b}``; ``A`` is assumed to have full row rank."""

    kind = "indicator_affine"

    def __init__(self, A, b):
        A = as_matrix(A, "A")
        b = as_vector(b, "b")
        if A.shape[0] != b.shape[0]:
            raise DimensionError(f"A has shape {A.shape} but b has shape {b.shape}")
        self.A = _frozen(A)
        self.b = _frozen(b)
        self.dim = A.shape[1]
        self._pinv = _frozen(np.linalg.pinv(A))

    def eval(self, v):
        v = self._check(v)
        r = self.A @ v - self.b
        if r.size and np.abs(r).max() > INDICATOR_SLACK:
            return np.inf
        return 0.0

    def eval_rows(self, V):
        R = np.asarray(V, float) @ self.A.T - self.b
        out = np.zeros(R.shape[0])
        if R.shape[1]:
            out[np.abs(R).max(axis=1) > INDICATOR_SLACK] = np.inf
        return out

    def prox_unchecked(self, step, v):
        return v - self._pinv @ (self.A @ v - self.b)

    def conjugate(self):
        m, n = self.A.shape
        if m != n or np.linalg.matrix_rank(self.A) < n:
            raise UnsupportedOperation(
                "conjugate of an affine-set indicator is only in the catalog when the set "
                "is a single point; specify the conjugate descriptor manually"
            )
        return Linear(np.linalg.solve(self.A, self.b))

    def to_dict(self):
        return {"kind": self.kind, "A": self.A.tolist(), "b": self.b.tolist()}


class Zero(ConvexFunction):
    kind = "zero"
    differentiable = True

    def eval(self, v):
        self._check(v)
        return 0.0

    def eval_rows(self, V):
        return np.zeros(np.asarray(V).shape[0])

    def gradient(self, v):
        return np.zeros_like(self._check(v))

    def affine_gradient(self, dim):
        return np.zeros((dim, dim)), np.zeros(dim)

    def prox_unchecked(self, step, v):
        return v.copy()

    def conjugate(self):
        return IndicatorLinfBall(0.0)

    def to_dict(self):
        return {"kind": self.kind}


_KINDS = {
    "quadratic": Quadratic,
    "scaled_l1": ScaledL1,
    "linear": Linear,
    "indicator_linf_ball": IndicatorLinfBall,
    "indicator_affine": IndicatorAffine,
    "zero": Zero,
}


def from_dict(obj):
    """Inverse of ``ConvexFunction.to_dict``."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise FunctionError(f"function descriptor must be an object with a 'kind', got {obj!r}")
    kind = obj["kind"]
    params = {k: v for k, v in obj.items() if k != "kind"}
    expected = {
        "quadratic": ({"A", "b"}, {"P", "q", "const"}),
        "scaled_l1": ({"lam"},),
        "linear": ({"c"},),
        "indicator_linf_ball": ({"radius"},),
        "indicator_affine": ({"A", "b"},),
        "zero": (set(),),
    }
    if kind not in expected:
        raise FunctionError(f"unknown function kind {kind!r}; expected one of {sorted(_KINDS)}")
    keys = set(params)
    if kind == "quadratic":
        if keys == {"A", "b"}:
            return Quadratic.least_squares(params["A"], params["b"])
        if "P" in keys and keys <= {"P", "q", "const"}:
            return Quadratic(params["P"], params.get("q"), params.get("const", 0.0))
        raise FunctionError(
            f"quadratic needs either keys A, b or P[, q, const]; got {sorted(keys)}"
        )
    (allowed,) = expected[kind]
    if keys != allowed:
        raise FunctionError(f"{kind} expects keys {sorted(allowed)}, got {sorted(keys)}")
    return _KINDS[kind](**params)


def evaluate(d, v):
    """Value of ``d`` at ``v``; ``inf`` outside the domain of an indicator."""
    return d.eval(v)


def conjugate(d):
    return d.conjugate()


def prox(d, step, point):
    step = float(step)
    if not step > 0.0 or not np.isfinite(step):
        raise FunctionError(f"prox step must be positive and finite, got {step}")
    return d.prox(step, point)
