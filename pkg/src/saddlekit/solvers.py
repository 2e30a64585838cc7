"""Proximal Arrow-Hurwicz, PDHG and two-step-size PDHG.

All three share the same primal step::

    x+ = prox_{tau f}(x - tau F^T y)

and differ in the point fed to the dual step::

    y+ = prox_{sigma g*}(y + sigma F z)

with ``z = x+`` for Arrow-Hurwicz and the extrapolation ``z = 2 x+ - x``
for PDHG.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_vector

__all__ = [
    "SolverError",
    "StepSizeError",
    "DivergenceError",
    "StepSchedule",
    "SolverState",
    "TraceRecord",
    "Trace",
    "ALGORITHMS",
    "validate_schedule",
    "initial_state",
    "arrow_hurwicz_step",
    "pdhg_step",
    "general_pdhg_step",
    "step",
    "run",
    "orbit_invariant",
]

ALGORITHMS = ("arrow-hurwicz", "pdhg", "general-pdhg")
DIVERGENCE_BOUND = 1e12


class SolverError(RuntimeError):
    pass


class StepSizeError(SolverError, ValueError):
    def __init__(self, message, bound):
        super().__init__(message)
        self.bound = bound


class DivergenceError(SolverError):
    def __init__(self, message, last_index):
        super().__init__(message)
        self.last_index = last_index


@dataclass(frozen=True)
class StepSchedule:
    """Primal step ``tau`` and dual step ``sigma``; ``single`` when they are one ``s``."""

    tau: float
    sigma: float
    single: bool = False

    def __post_init__(self):
        for name in ("tau", "sigma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @classmethod
    def from_s(cls, s):
        s = float(s)
        return cls(s, s, True)

    @classmethod
    def pair(cls, tau, sigma):
        return cls(float(tau), float(sigma), False)

    @property
    def s(self):
        """Single step size, or ``sqrt(tau sigma)`` for a pair."""
        return self.tau if self.single else float(np.sqrt(self.tau * self.sigma))

    def product_bound(self, norm_F):
        """``s^2 ||F||^2`` (``tau sigma ||F||^2`` for a pair)."""
        return self.tau * self.sigma * norm_F ** 2

    def to_dict(self):
        if self.single:
            return {"s": self.tau}
        return {"tau": self.tau, "sigma": self.sigma}


def validate_schedule(p, sched, strict=False):
    """Raise :class:`StepSizeError` unless ``tau sigma ||F||^2 <= 1`` (``< 1`` if strict)."""
    bound = sched.product_bound(p.norm_F)
    ok = bound < 1.0 if strict else bound <= 1.0
    if not ok:
        relation = "< 1" if strict else "<= 1"
        if sched.single:
            what = f"s*||F|| = {sched.tau * p.norm_F!r}"
        else:
            what = f"sqrt(tau*sigma)*||F|| = {np.sqrt(sched.tau * sched.sigma) * p.norm_F!r}"
        raise StepSizeError(f"step sizes violate {relation}: {what}", bound)
    return True


@dataclass(frozen=True)
class SolverState:
    """Iterate ``(x_k, y_k)`` with the previous primal iterate and running sums.

    ``sum_x`` and ``sum_y`` accumulate ``x_1 + ... + x_k`` (the initial point
    is not included), so ``avg_x`` is the average used in the ergodic rates.
    """

    k: int
    x: np.ndarray
    y: np.ndarray
    x_prev: np.ndarray
    sum_x: np.ndarray
    sum_y: np.ndarray

    @property
    def avg_x(self):
        return self.sum_x / self.k if self.k else self.x.copy()

    @property
    def avg_y(self):
        return self.sum_y / self.k if self.k else self.y.copy()


def initial_state(p, x0, y0):
    x0 = as_vector(x0, "x0").copy()
    y0 = as_vector(y0, "y0").copy()
    if x0.shape != (p.d1,) or y0.shape != (p.d2,):
        raise ValueError(
            f"initial point has shapes {x0.shape}, {y0.shape}; problem needs ({p.d1},), ({p.d2},)"
        )
    return SolverState(0, x0, y0, x0.copy(), np.zeros(p.d1), np.zeros(p.d2))


def _primal_dual(p, state, tau, sigma, extrapolate):
    x = p.f.prox_unchecked(tau, state.x - tau * (p.F.T @ state.y))
    z = 2.0 * x - state.x if extrapolate else x
    y = p.gstar.prox_unchecked(sigma, state.y + sigma * (p.F @ z))
    return SolverState(state.k + 1, x, y, state.x, state.sum_x + x, state.sum_y + y)


def arrow_hurwicz_step(p, state, s):
    """One proximal Arrow-Hurwicz step (dual step sees the new primal iterate)."""
    return _primal_dual(p, state, s, s, False)


def pdhg_step(p, state, s):
    return _primal_dual(p, state, s, s, True)


def general_pdhg_step(p, state, tau, sigma):
    return _primal_dual(p, state, tau, sigma, True)


def step(p, state, algorithm, sched):
    if algorithm == "arrow-hurwicz":
        return _primal_dual(p, state, sched.tau, sched.sigma, False)
    if algorithm in ("pdhg", "general-pdhg"):
        return _primal_dual(p, state, sched.tau, sched.sigma, True)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


@dataclass
class TraceRecord:
    k: int
    x: np.ndarray
    y: np.ndarray
    diagnostics: dict = field(default_factory=dict)


@dataclass
class Trace:
    records: list
    metadata: dict
    final_state: SolverState = None

    def __len__(self):
        return len(self.records)

    @property
    def xs(self):
        return np.array([r.x for r in self.records])

    @property
    def ys(self):
        return np.array([r.y for r in self.records])


def run(p, algorithm, sched, x0, y0, N, hooks=(), demonstration=False, early_stop_ne=None,
        seed=0):
    """Run ``N`` iterations and record every iterate, ``k = 0..N``.

    The step-size condition is enforced unless ``demonstration`` is set, which
    is only honoured for Arrow-Hurwicz (it exists to show the non-convergent
    orbits outside the admissible range). Each hook is called as
    ``hook(p, state)`` and the returned mapping is stored on the record.

    ``early_stop_ne`` stops once the numerical error of a step falls below the
    given value (off by default so runs have uniform length).
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    if algorithm == "pdhg" and not sched.single:
        raise ValueError("pdhg takes a single step size; use general-pdhg for (tau, sigma)")
    if N < 0:
        raise ValueError(f"N must be nonnegative, got {N}")
    if not (demonstration and algorithm == "arrow-hurwicz"):
        validate_schedule(p, sched)

    state = initial_state(p, x0, y0)
    meta = {
        "problem": p.fingerprint(),
        "algorithm": algorithm,
        "schedule": sched.to_dict(),
        "seed": seed,
    }

    def record(st):
        rec = TraceRecord(st.k, st.x, st.y)
        for hook in hooks:
            rec.diagnostics.update(hook(p, st))
        return rec

    records = [record(state)]
    for _ in range(N):
        new = step(p, state, algorithm, sched)
        with np.errstate(over="ignore", invalid="ignore"):
            norm = np.sqrt(new.x @ new.x + new.y @ new.y)
        if not norm <= DIVERGENCE_BOUND:
            what = "non-finite iterate" if not np.isfinite(norm) else (
                f"iterate norm exceeded {DIVERGENCE_BOUND:g}")
            raise DivergenceError(f"{what} at k={new.k}", records[-1].k)
        prev, state = state, new
        records.append(record(state))
        if early_stop_ne is not None:
            dx, dy = state.x - prev.x, state.y - prev.y
            ne = (dx @ dx / (2 * sched.tau) + dy @ dy / (2 * sched.sigma)
                  - dy @ (p.F @ dx))
            if ne < early_stop_ne:
                break
    return Trace(records, meta, state)


def orbit_invariant(x, y, s):
    """``u^2 + v^2 + s u v`` with ``u = x - 1``, ``v = y - 1``.

    Conserved by Arrow-Hurwicz (equivalently symplectic Euler) on the
    counterexample ``x - x y + y``: the one-step map on ``(u, v)`` is
    ``[[1, s], [-s, 1 - s^2]]``, which preserves this form. For ``0 < s < 2``
    the form is positive definite, so orbits stay on ellipses around the
    saddle ``(1, 1)`` and never approach it.
    """
    u = np.asarray(x, float) - 1.0
    v = np.asarray(y, float) - 1.0
    return u * u + v * v + s * u * v
