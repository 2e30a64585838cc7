"""Continuous-time models of the primal-dual iterations.

Three vector fields are available for problems whose ``f`` and ``g*`` have
affine gradients:

* low resolution:   ``X' = -F^T Y - grad f(X)``, ``Y' = F X - grad g*(Y)``
* high resolution:  the same right-hand side with mass matrix
  ``[[I, -s F^T], [-s F, I]]`` on ``(X', Y')``
* general high resolution: mass matrix ``[[a I, -s F^T], [-s F, b I]]`` with
  ``s = sqrt(tau sigma)``, ``a = sqrt(sigma / tau)``, ``b = 1 / a``.

An implicit Euler step of size ``s`` on a high-resolution system reproduces
one PDHG iteration exactly; :func:`implicit_euler_step` builds that step as a
single block linear solve, independent of the proximal-map code path.
"""

from dataclasses import dataclass

import numpy as np

from scipy.integrate import trapezoid

from .linalg import NotPositiveDefiniteError, as_vector, cholesky
from .functions import UnsupportedOperation

__all__ = [
    "OdeError",
    "OdeSystem",
    "ContinuousState",
    "low_res",
    "high_res",
    "general_high_res",
    "field",
    "symplectic_euler_step",
    "implicit_euler_step",
    "implicit_residual",
    "rk4_step",
    "rk4_trajectory",
    "hamiltonian",
    "time_average",
]

RESIDUAL_TOL = 1e-10


class OdeError(ValueError):
    pass


@dataclass(frozen=True)
class ContinuousState:
    t: float
    X: np.ndarray
    Y: np.ndarray


class OdeSystem:
    """Affine vector field of one of the three kinds (see module docstring)."""

    def __init__(self, kind, problem, s=None, tau=None, sigma=None):
        if kind not in ("low", "high", "general"):
            raise OdeError(f"unknown system kind {kind!r}")
        self.kind = kind
        self.problem = problem
        d1, d2 = problem.d1, problem.d2
        try:
            self.P, self.q = problem.f.affine_gradient(d1)
            self.Q, self.r = problem.gstar.affine_gradient(d2)
        except UnsupportedOperation as exc:
            raise OdeError(
                f"continuous models need f and g* with affine gradients: {exc}"
            ) from None
        F = problem.F
        # -(grad f(X) + F^T Y), F X - grad g*(Y)  ==  -K z - c
        self.K = np.block([[self.P, F.T], [-F, self.Q]])
        self.c = np.concatenate([self.q, self.r])
        if kind == "low":
            self.s = s
            self.alpha = self.beta = 1.0
            self.mass = None
            self._factor = None
            return
        if kind == "high":
            if s is None or not s > 0:
                raise OdeError("high-resolution system needs a positive step s")
            self.alpha = self.beta = 1.0
            self.s = float(s)
        else:
            if tau is None or sigma is None or not (tau > 0 and sigma > 0):
                raise OdeError("general high-resolution system needs positive tau and sigma")
            self.tau, self.sigma = float(tau), float(sigma)
            self.s = float(np.sqrt(tau * sigma))
            self.alpha = float(np.sqrt(sigma / tau))
            self.beta = float(np.sqrt(tau / sigma))
        self.mass = np.block([
            [self.alpha * np.eye(d1), -self.s * F.T],
            [-self.s * F, self.beta * np.eye(d2)],
        ])
        self._factor = None

    def mass_factor(self):
        """Cholesky factor of the mass matrix, built on first use.

        At ``s ||F|| = 1`` the mass matrix is singular: the implicit Euler step
        is still well defined there, but the vector field is not.
        """
        if self._factor is None:
            try:
                self._factor = cholesky(self.mass)
            except NotPositiveDefiniteError:
                raise OdeError(
                    "mass matrix is singular or indefinite; the high-resolution field needs "
                    f"s*||F|| < 1 (got {self.s * self.problem.norm_F!r})"
                ) from None
        return self._factor

    def rhs(self, X, Y):
        z = np.concatenate([X, Y])
        return -(self.K @ z) - self.c

    def split(self, z):
        return z[:self.problem.d1], z[self.problem.d1:]


def low_res(problem):
    return OdeSystem("low", problem)


def high_res(problem, s):
    return OdeSystem("high", problem, s=s)


def general_high_res(problem, tau, sigma):
    return OdeSystem("general", problem, tau=tau, sigma=sigma)


def _state(st):
    return as_vector(st.X, "X"), as_vector(st.Y, "Y")


def field(sys, st):
    """Return ``(X', Y')`` at ``st``."""
    X, Y = _state(st)
    rhs = sys.rhs(X, Y)
    if sys.kind == "low":
        return sys.split(rhs)
    return sys.split(sys.mass_factor().solve(rhs))


def symplectic_euler_step(sys, st, s):
    """Forward step in ``X``, then a step in ``Y`` that uses the new ``X``.

    This is the symplectic Euler scheme for the low-resolution field; it only
    applies when the gradients of ``f`` and ``g*`` are constant (so that the
    field is a Hamiltonian vector field), as for the bilinear counterexample.
    """
    if sys.kind != "low":
        raise OdeError("symplectic Euler applies to the low-resolution system")
    if np.any(sys.P) or np.any(sys.Q):
        raise OdeError("symplectic Euler needs f and g* with constant gradients")
    X, Y = _state(st)
    F = sys.problem.F
    Xn = X + s * (-(F.T @ Y) - sys.q)
    Yn = Y + s * (F @ Xn - sys.r)
    return ContinuousState(st.t + s, Xn, Yn)


def implicit_euler_step(sys, st, s):
    """Solve ``M (z+ - z) / s = -K z+ - c`` for ``z+ = (X+, Y+)``."""
    if sys.kind == "low":
        raise OdeError("implicit Euler correspondence needs a high-resolution system")
    X, Y = _state(st)
    z = np.concatenate([X, Y])
    lhs = sys.mass / s + sys.K
    rhs = sys.mass @ z / s - sys.c
    try:
        zn = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        raise OdeError("implicit Euler system is singular") from None
    Xn, Yn = sys.split(zn)
    return ContinuousState(st.t + s, Xn, Yn)


def implicit_residual(sys, st, new, s):
    """Max-norm residual of the implicit relations between ``st`` and ``new``::

        a (X+ - X)/s - F^T (Y+ - Y) = -F^T Y+ - grad f(X+)
        b (Y+ - Y)/s - F (X+ - X)   =  F X+   - grad g*(Y+)
    """
    X, Y = _state(st)
    Xn, Yn = _state(new)
    F = sys.problem.F
    gf = sys.P @ Xn + sys.q
    gg = sys.Q @ Yn + sys.r
    r1 = sys.alpha * (Xn - X) / s - F.T @ (Yn - Y) + F.T @ Yn + gf
    r2 = sys.beta * (Yn - Y) / s - F @ (Xn - X) - F @ Xn + gg
    return float(max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0)))


def rk4_step(sys, st, dt):
    X, Y = _state(st)

    def f(X, Y):
        return field(sys, ContinuousState(0.0, X, Y))

    k1x, k1y = f(X, Y)
    k2x, k2y = f(X + 0.5 * dt * k1x, Y + 0.5 * dt * k1y)
    k3x, k3y = f(X + 0.5 * dt * k2x, Y + 0.5 * dt * k2y)
    k4x, k4y = f(X + dt * k3x, Y + dt * k3y)
    Xn = X + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    Yn = Y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
    return ContinuousState(st.t + dt, Xn, Yn)


def rk4_trajectory(sys, st0, dt, steps):
    """Classical fourth-order Runge-Kutta; returns ``steps + 1`` states."""
    if steps < 0:
        raise OdeError(f"steps must be nonnegative, got {steps}")
    X, Y = _state(st0)
    out = [ContinuousState(float(st0.t), X.copy(), Y.copy())]
    st = out[0]
    for _ in range(int(steps)):
        st = rk4_step(sys, st, dt)
        out.append(st)
    return out


def hamiltonian(st):
    """``H(x, y) = (x^2 + y^2)/2 - x - y`` for the scalar counterexample."""
    X, Y = _state(st)
    if X.shape != (1,) or Y.shape != (1,):
        raise OdeError(f"hamiltonian is defined for scalar states, got {X.shape}, {Y.shape}")
    x, y = float(X[0]), float(Y[0])
    return 0.5 * (x * x + y * y) - x - y


def time_average(states):
    """Trapezoidal time averages ``(1/t) int_0^t X`` and the same for ``Y``."""
    if len(states) < 2:
        raise OdeError("time average needs at least two samples")
    t = np.array([st.t for st in states])
    Xs = np.array([st.X for st in states])
    Ys = np.array([st.Y for st in states])
    span = t[-1] - t[0]
    return (trapezoid(Xs, t, axis=0) / span, trapezoid(Ys, t, axis=0) / span)
