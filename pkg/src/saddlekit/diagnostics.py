"""Lyapunov functions, numerical error and convergence-bound checks.

For a schedule with primal step ``tau`` and dual step ``sigma`` (``tau =
sigma = s`` for plain PDHG) the quantities evaluated on iterates are::

    E(x, y; a)   = ||x - a_x||^2/(2 tau) + ||y - a_y||^2/(2 sigma) - <F (x - a_x), y - a_y>
    NE_k         = E(x_{k+1}, y_{k+1}; (x_k, y_k))
    gap(c; p)    = f(c_x) - f(p_x) + g*(c_y) - g*(p_y) + <F (c_x - p_x), p_y> - <F p_x, c_y - p_y>

``E`` and ``NE`` are nonnegative whenever ``tau sigma ||F||^2 <= 1``, and a
point belongs to the variational-inequality set when its gap against every
probe is nonpositive.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .linalg import as_vector
from .ode import time_average
from .ode import field as ode_field
from . import functions as fn

__all__ = [
    "Anchor",
    "BoundCheck",
    "Verdict",
    "DiagnosticsReport",
    "lyapunov",
    "numerical_error",
    "vi_gap",
    "lyapunov_series",
    "ne_series",
    "ergodic_averages",
    "ergodic_gap_series",
    "probe_points",
    "theorem_bound_check",
    "monotonicity_verdict",
    "rate_fit",
    "build_report",
    "velocity_lyapunov",
    "continuous_checks",
    "REL_TOL",
    "ABS_TOL",
]

REL_TOL = 1e-9
ABS_TOL = 1e-12


@dataclass(frozen=True)
class Anchor:
    x: np.ndarray
    y: np.ndarray
    kind: str = "arbitrary"
    certificate: object = None

    @classmethod
    def saddle(cls, certificate):
        return cls(certificate.x_star, certificate.y_star, "saddle", certificate)


@dataclass
class BoundCheck:
    theorem: str
    lhs: float
    rhs: float
    passed: bool
    n: int = None
    note: str = ""

    def to_dict(self):
        return {"theorem": self.theorem, "lhs": _num(self.lhs), "rhs": _num(self.rhs),
                "pass": bool(self.passed), "n": self.n, "note": self.note}


@dataclass(frozen=True)
class Verdict:
    passed: bool
    first_violation: int = None

    def __bool__(self):
        return self.passed


def _weights(sched):
    return sched.tau, sched.sigma


def _pair(v, name):
    x, y = v
    return as_vector(x, name + " x"), as_vector(y, name + " y")


def lyapunov(p, state, anchor, sched):
    """``E`` of the iterate ``state = (x, y)`` relative to ``anchor``."""
    x, y = _pair(state, "state")
    ax, ay = (anchor.x, anchor.y) if isinstance(anchor, Anchor) else _pair(anchor, "anchor")
    tau, sigma = _weights(sched)
    dx, dy = x - ax, y - ay
    return float(dx @ dx / (2 * tau) + dy @ dy / (2 * sigma) - dy @ (p.F @ dx))


def numerical_error(p, prev, nxt, sched):
    """Quadratic form of the step ``prev -> nxt``; bounds the per-step Lyapunov decrease."""
    return lyapunov(p, nxt, prev, sched)


def vi_gap(p, candidate, probe):
    """Gap of ``candidate`` against ``probe``; may be ``+/-inf`` when an indicator is violated."""
    cx, cy = _pair(candidate, "candidate")
    px, py = _pair(probe, "probe")
    f_c, f_p = p.f.eval(cx), p.f.eval(px)
    g_c, g_p = p.gstar.eval(cy), p.gstar.eval(py)
    if np.isinf(f_p) or np.isinf(g_p):
        # probe outside the domain: -inf unless the candidate is also infeasible
        return np.nan if (np.isinf(f_c) or np.isinf(g_c)) else -np.inf
    bilinear = float(py @ (p.F @ (cx - px)) - (p.F @ px) @ (cy - py))
    return f_c - f_p + g_c - g_p + bilinear


def _lyap_rows(p, X, Y, ax, ay, sched):
    dx, dy = X - ax, Y - ay
    return (np.einsum("ki,ki->k", dx, dx) / (2 * sched.tau)
            + np.einsum("ki,ki->k", dy, dy) / (2 * sched.sigma)
            - np.einsum("ki,ki->k", dy, dx @ p.F.T))


def lyapunov_series(trace, p, anchor, sched):
    ax, ay = (anchor.x, anchor.y) if isinstance(anchor, Anchor) else _pair(anchor, "anchor")
    return _lyap_rows(p, trace.xs, trace.ys, ax, ay, sched)


def ne_series(trace, p, sched):
    X, Y = trace.xs, trace.ys
    return _lyap_rows(p, X[1:], Y[1:], X[:-1], Y[:-1], sched)


def _gap_rows(p, CX, CY, probe, cand_values=None):
    """``vi_gap`` of every row of ``(CX, CY)`` against one probe."""
    px, py = _pair(probe, "probe")
    if cand_values is None:
        cand_values = _candidate_values(p, CX, CY)
    f_p, g_p = p.f.eval(px), p.gstar.eval(py)
    if np.isinf(f_p) or np.isinf(g_p):
        return np.where(np.isinf(cand_values), np.nan, -np.inf)
    Fpx = p.F @ px
    return (cand_values - f_p - g_p + (CX @ p.F.T) @ py - CY @ Fpx)


def _candidate_values(p, CX, CY):
    return p.f.eval_rows(CX) + p.gstar.eval_rows(CY)


def ergodic_averages(trace):
    """Arrays ``xbar[N-1] = (x_1 + ... + x_N)/N`` for ``N = 1..len-1``."""
    xs, ys = trace.xs[1:], trace.ys[1:]
    n = np.arange(1, len(xs) + 1)[:, None]
    return np.cumsum(xs, axis=0) / n, np.cumsum(ys, axis=0) / n


def ergodic_gap_series(trace, p, probe):
    """``vi_gap`` of the ergodic average after ``N = 1..len-1`` steps against ``probe``."""
    xbar, ybar = ergodic_averages(trace)
    return _gap_rows(p, xbar, ybar, probe)


def probe_points(p, center_x, center_y, n=20, radius=5.0, seed=0):
    """Seeded probes uniform in a ball around the center, projected onto indicator domains."""
    rng = np.random.default_rng(seed)
    d = p.d1 + p.d2
    out = []
    for _ in range(n):
        g = rng.standard_normal(d)
        z = np.concatenate([center_x, center_y]) + radius * rng.uniform() ** (1 / d) * g / np.linalg.norm(g)
        x, y = z[:p.d1], z[p.d1:]
        if isinstance(p.f, (fn.IndicatorAffine, fn.IndicatorLinfBall)):
            x = p.f.prox(1.0, x)
        if isinstance(p.gstar, (fn.IndicatorAffine, fn.IndicatorLinfBall)):
            y = p.gstar.prox(1.0, y)
        out.append((x, y))
    return out


def _ok(lhs, rhs):
    """Elementwise ``lhs <= rhs (1 + REL_TOL) + ABS_TOL``; ``nan`` fails."""
    lhs = np.asarray(lhs, float)
    rhs = np.asarray(rhs, float)
    return lhs <= rhs + REL_TOL * np.abs(rhs) + ABS_TOL


def _worst(tag, lhs, rhs, note=""):
    """Collapse per-N comparisons into one entry at the tightest (or first failing) N."""
    lhs = np.asarray(lhs, float)
    rhs = np.broadcast_to(np.asarray(rhs, float), lhs.shape)
    passes = _ok(lhs, rhs)
    if not passes.all():
        i = int(np.argmin(passes))
    else:
        with np.errstate(invalid="ignore"):
            slack = np.where(np.isneginf(lhs), np.inf, rhs - lhs)
        i = int(np.argmin(slack))
    return BoundCheck(tag, float(lhs[i]), float(rhs[i]), bool(passes.all()), i + 1, note)


def theorem_bound_check(trace, p, sched, certificate=None, n_probes=20, seed=0):
    """Evaluate the convergence bounds on a PDHG trace.

    Each returned :class:`BoundCheck` covers every ``N = 1..len(trace)-1``;
    it reports the ``N`` with the smallest margin (or the first failure).
    Checks anchored at the saddle point are skipped, with a note, when no
    certificate is given. Tags (``pair-`` prefixed for a ``(tau, sigma)`` pair,
    with ``s``-weighted forms replaced by ``sigma``/``tau`` weights)::

        ergodic-gap        gap(xbar_N; probe) <= E(z_0; probe) / N, worst over probes
        lyapunov-descent   E_{k+1} - E_k <= -NE_k
        step-avg/-min      mean/min over k < N of a_k <= C / N, with
                           a_k = |dx_k|^2 + |dy_k|^2 - 2s <F dx_k, dy_k>
        last-step          a_{N-1} <= C / N
        *-strong           |dx_k|^2 + |dy_k|^2 forms, RHS scaled by (1+rho)/(1-rho);
                           only when rho = s ||F|| < 1
        avg-primal         |xbar_N - x*|^2 <= 2 E_0 / (mu N); only when mu > 0
    """
    checks = []
    M = len(trace) - 1
    if M < 1:
        return checks
    tau, sigma = _weights(sched)
    s = sched.s
    rho = float(np.sqrt(sched.product_bound(p.norm_F)))
    strict = rho < 1.0
    x0, y0 = trace.records[0].x, trace.records[0].y
    xbar, ybar = ergodic_averages(trace)
    Ns = np.arange(1, M + 1)

    probes = []
    if certificate is not None:
        probes.append((certificate.x_star, certificate.y_star))
        center = (certificate.x_star, certificate.y_star)
    else:
        center = (np.zeros(p.d1), np.zeros(p.d2))
    probes += probe_points(p, *center, n=n_probes, seed=seed)
    cand = _candidate_values(p, xbar, ybar)
    worst = None
    for j, probe in enumerate(probes):
        E0 = lyapunov(p, (x0, y0), probe, sched)
        c = _worst("ergodic-gap", _gap_rows(p, xbar, ybar, probe, cand), E0 / Ns)
        c.note = f"probe {j} of {len(probes)}" + (" (saddle)" if j == 0 and certificate else "")
        if worst is None or (worst.passed and (not c.passed or c.rhs - c.lhs < worst.rhs - worst.lhs)):
            worst = c
    checks.append(worst)

    if certificate is None:
        checks.append(BoundCheck("saddle-anchored", np.nan, np.nan, True, None,
                                 "skipped: no saddle certificate"))
        return checks

    xs_, ys_ = certificate.x_star, certificate.y_star
    dx = np.diff(trace.xs, axis=0)
    dy = np.diff(trace.ys, axis=0)
    coupling = np.einsum("ki,ki->k", dy, dx @ p.F.T)
    sq_x = np.einsum("ki,ki->k", dx, dx)
    sq_y = np.einsum("ki,ki->k", dy, dy)
    ex0, ey0 = x0 - xs_, y0 - ys_
    d0x, d0y = float(ex0 @ ex0), float(ey0 @ ey0)
    c0 = float(ey0 @ (p.F @ ex0))
    E0 = lyapunov(p, (x0, y0), (xs_, ys_), sched)
    running_avg = lambda a: np.cumsum(a) / Ns
    running_min = lambda a: np.minimum.accumulate(a)

    # Lyapunov descent by at least the numerical error at every step
    E = lyapunov_series(trace, p, Anchor.saddle(certificate), sched)
    ne = ne_series(trace, p, sched)
    checks.append(_worst("lyapunov-descent", E[1:] - E[:-1], -ne))

    if sched.single:
        a = sq_x + sq_y - 2 * s * coupling
        C = d0x + d0y - 2 * s * c0
        checks.append(_worst("step-avg", running_avg(a), C / Ns))
        checks.append(_worst("step-min", running_min(a), C / Ns))
        checks.append(_worst("last-step", a, C / Ns))
        if strict:
            b = sq_x + sq_y
            Cs = (1 + rho) * (d0x + d0y) / (1 - rho)
            checks.append(_worst("step-strong-avg", running_avg(b), Cs / Ns))
            checks.append(_worst("step-strong-min", running_min(b), Cs / Ns))
            checks.append(_worst("last-step-strong", b, Cs / Ns))
        else:
            checks.append(BoundCheck("step-strong", np.nan, np.nan, True, None,
                                     "skipped: needs s*||F|| < 1"))
        tag_avg = "avg-primal"
    else:
        a = sigma * sq_x + tau * sq_y - 2 * tau * sigma * coupling
        C = sigma * d0x + tau * d0y - 2 * tau * sigma * c0
        checks.append(_worst("pair-step-avg", running_avg(a), C / Ns))
        checks.append(_worst("pair-step-min", running_min(a), C / Ns))
        checks.append(_worst("pair-last-step", a, C / Ns))
        if strict:
            b = sigma * sq_x + tau * sq_y
            Cs = (1 + rho) * (sigma * d0x + tau * d0y) / (1 - rho)
            checks.append(_worst("pair-step-strong-avg", running_avg(b), Cs / Ns))
            checks.append(_worst("pair-step-strong-min", running_min(b), Cs / Ns))
            checks.append(_worst("pair-last-step-strong", b, Cs / Ns))
        else:
            checks.append(BoundCheck("pair-step-strong", np.nan, np.nan, True, None,
                                     "skipped: needs tau*sigma*||F||^2 < 1"))
        tag_avg = "pair-avg-primal"

    if p.mu > 0:
        dist = np.sum((xbar - xs_) ** 2, axis=1)
        checks.append(_worst(tag_avg, dist, 2 * E0 / (p.mu * Ns)))
    else:
        checks.append(BoundCheck(tag_avg, np.nan, np.nan, True, None,
                                 "skipped: f is not strongly convex"))
    return checks


def monotonicity_verdict(series, tol=1e-9):
    """Pass iff ``series[k+1] <= series[k] + tol * max(1, |series[k]|)`` for all ``k``."""
    s = np.asarray(series, float)
    if s.size < 2:
        raise ValueError("monotonicity needs at least two values")
    allowed = s[:-1] + tol * np.maximum(1.0, np.abs(s[:-1]))
    bad = np.flatnonzero(~(s[1:] <= allowed))
    if bad.size:
        return Verdict(False, int(bad[0]))
    return Verdict(True)


def rate_fit(series, k_min=1):
    """Least-squares slope of ``log series[k]`` against ``log k`` for ``k >= k_min``.

    Nonpositive entries are dropped; an ``O(1/k)`` series has slope about -1.
    """
    s = np.asarray(series, float)
    k = np.arange(s.size)
    keep = (k >= max(k_min, 1)) & (s > 0) & np.isfinite(s)
    if keep.sum() < 10:
        raise ValueError(f"rate fit needs at least 10 positive values, got {int(keep.sum())}")
    slope, _ = np.polyfit(np.log(k[keep]), np.log(s[keep]), 1)
    return float(slope)


@dataclass
class DiagnosticsReport:
    lyapunov: np.ndarray
    lyapunov_anchor: np.ndarray
    ne: np.ndarray
    vi_gap: np.ndarray
    avg_dist_sq: np.ndarray
    monotone_lyapunov: Verdict
    monotone_ne: Verdict
    rate_slope_ne: float
    bound_checks: list = field(default_factory=list)

    def to_dict(self):
        def verdict(v):
            return None if v is None else asdict(v)

        return {
            "series": {
                "lyapunov_saddle": [_num(v) for v in self.lyapunov],
                "lyapunov_anchor": [_num(v) for v in self.lyapunov_anchor],
                "ne": [_num(v) for v in self.ne],
                "vi_gap_saddle": [_num(v) for v in self.vi_gap],
                "dist_sq_avg_x": [_num(v) for v in self.avg_dist_sq],
            },
            "monotone_lyapunov": verdict(self.monotone_lyapunov),
            "monotone_ne": verdict(self.monotone_ne),
            "rate_slope_ne": _num(self.rate_slope_ne),
            "bound_checks": [c.to_dict() for c in self.bound_checks],
        }


def _num(v):
    """JSON-safe float: non-finite values become strings."""
    if v is None:
        return None
    v = float(v)
    if np.isfinite(v):
        return v
    return "nan" if np.isnan(v) else ("inf" if v > 0 else "-inf")


def build_report(trace, p, sched, certificate=None, anchor=None, checks=True, rate_k_min=1):
    """Evaluate every series and check on a trace.

    ``anchor`` defaults to the origin. Series that need the saddle point are
    filled with ``nan`` when no certificate is available.
    """
    n = len(trace)
    if anchor is None:
        anchor = Anchor(np.zeros(p.d1), np.zeros(p.d2))
    lyap_anchor = lyapunov_series(trace, p, anchor, sched)
    ne = ne_series(trace, p, sched)
    nan = np.full(n, np.nan)
    if certificate is not None:
        lyap = lyapunov_series(trace, p, Anchor.saddle(certificate), sched)
        gap, dist = nan.copy(), nan.copy()
        if n > 1:
            xbar, ybar = ergodic_averages(trace)
            probe = (certificate.x_star, certificate.y_star)
            gap[1:] = _gap_rows(p, xbar, ybar, probe)
            dist[1:] = np.sum((xbar - certificate.x_star) ** 2, axis=1)
        mono_l = monotonicity_verdict(lyap) if n > 1 else Verdict(True)
    else:
        lyap, gap, dist = nan.copy(), nan.copy(), nan.copy()
        mono_l = None
    mono_ne = monotonicity_verdict(ne) if ne.size > 1 else Verdict(True)
    try:
        slope = rate_fit(ne, rate_k_min)
    except ValueError:
        slope = np.nan
    bounds = theorem_bound_check(trace, p, sched, certificate) if checks else []
    return DiagnosticsReport(lyap, lyap_anchor, ne, gap, dist, mono_l, mono_ne, slope, bounds)


# -- continuous time ---------------------------------------------------------


def _ode_weights(sys):
    if sys.kind == "general":
        return sys.tau, sys.sigma
    return sys.s, sys.s


class _Weights:
    def __init__(self, tau, sigma):
        self.tau, self.sigma = tau, sigma


def velocity_lyapunov(sys, st):
    """``||X'||^2/(2 tau) + ||Y'||^2/(2 sigma) - <F X', Y'>`` along a high-resolution flow."""
    Xd, Yd = ode_field(sys, st)
    tau, sigma = _ode_weights(sys)
    return float(Xd @ Xd / (2 * tau) + Yd @ Yd / (2 * sigma) - Yd @ (sys.problem.F @ Xd))


def continuous_checks(sys, states, certificate=None, n_probes=20, seed=0, tol=1e-8):
    """Sampled versions of the continuous-time statements along an RK4 trajectory.

    ``states`` is the output of :func:`saddlekit.ode.rk4_trajectory` for a
    high-resolution system. Time averages use trapezoidal quadrature, so the
    comparisons carry an absolute tolerance ``tol``.
    """
    p = sys.problem
    w = _Weights(*_ode_weights(sys))
    checks = []
    vel = np.array([velocity_lyapunov(sys, st) for st in states])
    v = monotonicity_verdict(vel, tol)
    checks.append(BoundCheck("velocity-monotone", float(vel[-1]), float(vel[0]), v.passed,
                             v.first_violation))
    x0, y0 = states[0].X, states[0].Y
    t = states[-1].t - states[0].t
    Xbar, Ybar = time_average(states)
    probes = [] if certificate is None else [(certificate.x_star, certificate.y_star)]
    center = probes[0] if probes else (np.zeros(p.d1), np.zeros(p.d2))
    probes += probe_points(p, *center, n=n_probes, seed=seed)
    worst = None
    for probe in probes:
        lhs = vi_gap(p, (Xbar, Ybar), probe)
        rhs = sys.s * lyapunov(p, (x0, y0), probe, w) / t
        c = BoundCheck("continuous-gap", lhs, rhs, bool(lhs <= rhs + tol), None)
        if worst is None or (worst.passed and (not c.passed or rhs - lhs < worst.rhs - worst.lhs)):
            worst = c
    checks.append(worst)
    if certificate is None:
        return checks
    anchor = Anchor.saddle(certificate)
    E = np.array([lyapunov(p, (st.X, st.Y), anchor, w) for st in states])
    v = monotonicity_verdict(E, tol)
    checks.append(BoundCheck("continuous-lyapunov", float(E[-1]), float(E[0]), v.passed, v.first_violation))
    if p.mu > 0:
        lhs = float(np.sum((Xbar - certificate.x_star) ** 2))
        rhs = 2 * sys.s * float(E[0]) / (p.mu * t)
        checks.append(BoundCheck("continuous-avg-primal", lhs, rhs, bool(lhs <= rhs + tol)))
    return checks

