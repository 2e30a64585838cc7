import numpy as np
import numpy.testing as npt
import pytest

from saddlekit import functions as fn
from saddlekit import ode
from saddlekit import problems as pr
from saddlekit import solvers as so
from saddlekit.ode import ContinuousState


def state(x, y, t=0.0):
    return ContinuousState(t, np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float)))


@pytest.fixture
def cx():
    return pr.make_counterexample()


def test_low_res_field(cx):
    X, Y = ode.field(ode.low_res(cx), state(0, 1))
    npt.assert_array_equal(X, [0.0])
    npt.assert_array_equal(Y, [1.0])


def test_high_res_small_s_matches_low_res(cx):
    lo = np.concatenate(ode.field(ode.low_res(cx), state(2, 3)))
    hi = np.concatenate(ode.field(ode.high_res(cx, 1e-6), state(2, 3)))
    assert np.abs(hi - lo).max() <= 1e-5


def test_high_res_field_residual_and_saddle():
    p = pr.make_quadratic_pair(4, 3, seed=1)
    sys_ = ode.high_res(p, 0.9 / p.norm_F)
    st_ = state(np.arange(4.0), [1.0, -1.0, 0.5])
    Xd, Yd = ode.field(sys_, st_)
    resid = sys_.mass @ np.concatenate([Xd, Yd]) - sys_.rhs(st_.X, st_.Y)
    assert np.abs(resid).max() <= 1e-10
    cert = pr.saddle_oracle(p)
    Xd, Yd = ode.field(sys_, state(cert.x_star, cert.y_star))
    npt.assert_allclose(np.concatenate([Xd, Yd]), 0.0, atol=1e-12)


def test_general_high_res_coefficients():
    p = pr.make_quadratic_pair(2, 2, seed=0)
    sys_ = ode.general_high_res(p, 0.1, 0.4)
    assert sys_.alpha * sys_.beta == pytest.approx(1.0, rel=1e-15)
    assert sys_.s == pytest.approx(0.2, rel=1e-15)
    assert sys_.alpha == pytest.approx(2.0, rel=1e-15)


def test_field_errors(cx):
    lasso = pr.make_generalized_lasso(np.eye(2), [1.0, 1.0], 0.5, np.eye(2))
    with pytest.raises(ode.OdeError, match="affine gradients"):
        ode.low_res(lasso)
    with pytest.raises(ode.OdeError, match="singular"):
        ode.field(ode.high_res(cx, 1.0), state(0, 1))
    with pytest.raises(ode.OdeError):
        ode.high_res(cx, 0.0)


def test_symplectic_euler(cx):
    sys_ = ode.low_res(cx)
    st_ = state(0, 1)
    nxt = ode.symplectic_euler_step(sys_, st_, 1.0)
    assert (nxt.X[0], nxt.Y[0]) == (0.0, 2.0)
    for _ in range(5):
        nxt = ode.symplectic_euler_step(sys_, nxt, 1.0)
    assert (nxt.X[0], nxt.Y[0]) == (0.0, 1.0)
    fixed = ode.symplectic_euler_step(sys_, state(1, 1), 1.0)
    assert (fixed.X[0], fixed.Y[0]) == (1.0, 1.0)


@pytest.mark.parametrize("s", [0.5, 1.5])
def test_symplectic_euler_matches_arrow_hurwicz_and_invariant(cx, s):
    sys_ = ode.low_res(cx)
    tr = so.run(cx, "arrow-hurwicz", so.StepSchedule.from_s(s), [0.0], [1.0], 200, demonstration=True)
    st_ = state(0, 1)
    q0 = so.orbit_invariant(0.0, 1.0, s)
    for rec in tr.records[1:]:
        st_ = ode.symplectic_euler_step(sys_, st_, s)
        npt.assert_allclose(st_.X, rec.x, rtol=0, atol=1e-12)
        npt.assert_allclose(st_.Y, rec.y, rtol=0, atol=1e-12)
        assert abs(so.orbit_invariant(st_.X[0], st_.Y[0], s) - q0) <= 1e-12


def test_symplectic_euler_needs_constant_gradients():
    p = pr.make_quadratic_pair(2, 2)
    with pytest.raises(ode.OdeError):
        ode.symplectic_euler_step(ode.low_res(p), state([0, 0], [0, 0]), 0.1)


def test_implicit_euler_counterexample(cx):
    sys_ = ode.high_res(cx, 1.0)
    st_ = state(0, 1)
    for x, y in [(0.0, 2.0), (1.0, 1.0), (1.0, 1.0)]:
        new = ode.implicit_euler_step(sys_, st_, 1.0)
        npt.assert_allclose([new.X[0], new.Y[0]], [x, y], atol=1e-15)
        assert ode.implicit_residual(sys_, st_, new, 1.0) <= 1e-10
        st_ = new


def pdhg_vs_implicit(p, s, x0, y0, steps=100, tau=None, sigma=None):
    if tau is None:
        sys_ = ode.high_res(p, s)
        tr = so.run(p, "pdhg", so.StepSchedule.from_s(s), x0, y0, steps)
        h = s
    else:
        sys_ = ode.general_high_res(p, tau, sigma)
        tr = so.run(p, "general-pdhg", so.StepSchedule.pair(tau, sigma), x0, y0, steps)
        h = sys_.s
    st_ = state(x0, y0)
    dev = res = 0.0
    for rec in tr.records[1:]:
        new = ode.implicit_euler_step(sys_, st_, h)
        res = max(res, ode.implicit_residual(sys_, st_, new, h))
        dev = max(dev, np.abs(new.X - rec.x).max(), np.abs(new.Y - rec.y).max())
        st_ = new
    return dev, res


def test_implicit_euler_toy_quadratic():
    p = pr.make_problem(fn.Quadratic(np.eye(2)), fn.Quadratic(np.eye(2)), np.eye(2))
    dev, res = pdhg_vs_implicit(p, 0.5, [1.0, -2.0], [3.0, 0.5])
    assert dev <= 1e-10 and res <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_implicit_euler_random_quadratic(seed):
    p = pr.make_quadratic_pair(5, 5, seed)
    rng = np.random.default_rng(seed)
    x0, y0 = rng.standard_normal(5), rng.standard_normal(5)
    dev, res = pdhg_vs_implicit(p, 0.9 / p.norm_F, x0, y0)
    assert dev <= 1e-10 and res <= 1e-10
    tau = 0.3 / p.norm_F
    dev, res = pdhg_vs_implicit(p, None, x0, y0, tau=tau, sigma=0.9 / (tau * p.norm_F**2))
    assert dev <= 1e-10 and res <= 1e-10


def test_implicit_euler_needs_high_res(cx):
    with pytest.raises(ode.OdeError):
        ode.implicit_euler_step(ode.low_res(cx), state(0, 1), 1.0)


def test_rk4_circle_and_hamiltonian(cx):
    sys_ = ode.low_res(cx)
    dt = 1e-3
    steps = int(round(2 * np.pi / dt))
    traj = ode.rk4_trajectory(sys_, state(0, 1), 2 * np.pi / steps, steps)
    assert len(traj) == steps + 1
    end = traj[-1]
    assert abs(end.X[0]) <= 1e-6 and abs(end.Y[0] - 1.0) <= 1e-6
    H = np.array([ode.hamiltonian(s) for s in traj])
    assert np.abs(H + 0.5).max() <= 1e-6


def test_rk4_zero_steps(cx):
    traj = ode.rk4_trajectory(ode.low_res(cx), state(0.2, 0.3, t=1.5), 0.1, 0)
    assert len(traj) == 1 and traj[0].t == 1.5
    npt.assert_array_equal(traj[0].X, [0.2])


def test_rk4_fourth_order(cx):
    sys_ = ode.low_res(cx)
    T = 2.0

    def err(dt):
        n = int(round(T / dt))
        end = ode.rk4_trajectory(sys_, state(0, 1), dt, n)[-1]
        # exact: u = x - 1, v = y - 1 solve u' = v, v' = -u from (-1, 0)
        exact = (1 - np.cos(T), 1 + np.sin(T))
        return np.hypot(end.X[0] - exact[0], end.Y[0] - exact[1])

    ratio = err(0.1) / err(0.05)
    assert 14 <= ratio <= 18


def test_hamiltonian_values():
    assert ode.hamiltonian(state(0, 1)) == -0.5
    assert ode.hamiltonian(state(1, 1)) == -1.0
    assert ode.hamiltonian(state(0, 0)) == 0.0
    with pytest.raises(ode.OdeError):
        ode.hamiltonian(state([0, 1], [1, 1]))


def test_time_average_trapezoid():
    states = [state(t, 2 * t, t=t) for t in np.linspace(0, 2, 21)]
    X, Y = ode.time_average(states)
    npt.assert_allclose(X, [1.0], rtol=1e-14)
    npt.assert_allclose(Y, [2.0], rtol=1e-14)
    with pytest.raises(ode.OdeError):
        ode.time_average(states[:1])
