import math

import numpy as np
import pytest

from kuznetsov import Domain, PhysicalParams, discrete_norm
from kuznetsov.errors import DegeneracyError, InvalidArgumentError, NoLimitError
from kuznetsov.experiments import injected_trajectory, jacobian_check
from kuznetsov.linear import (BoundaryData, DampedWaveStepper, LinearProblem, State, Trajectory,
                              solve_linear)
from kuznetsov.nonlinear import (KuznetsovProblem, KuznetsovStepper, NonlinearConfig,
                                 integrate_velocity, quasilinear_residual, run_kuznetsov,
                                 v_infinity, velocity_from_potential)

NL = PhysicalParams(c=1.0, b=1.0, k=1.0, rho0=1.0)


def mode_problem(amplitude, params=NL, n=32, t_end=1.0, dt=0.02, mode=1):
    dom = Domain.interval(0.0, math.pi, n)
    return KuznetsovProblem(params, dom, u0=amplitude * dom.sample(lambda x: np.sin(mode * x)),
                            t_end=t_end, dt=dt)


class TestResidual:
    def test_disabled_nonlinearity_reduces_to_linear_step(self, rng):
        dom = Domain.interval(0.0, math.pi, 24)
        dt = 0.05
        u = rng.standard_normal(dom.n_nodes)
        w = rng.standard_normal(dom.n_nodes)
        u[dom.boundary] = w[dom.boundary] = 0.0
        z = np.zeros(len(dom.boundary))
        un, wn = DampedWaveStepper(dom, NL.c ** 2, NL.b, dt).step(u, w, z, z, z, z)
        old = State(0.0, u, w, np.zeros((dom.n_nodes, 1)))
        new = State(dt, un, wn, np.zeros((dom.n_nodes, 1)))
        r = quasilinear_residual(new, old, None, NL, dt, dom,
                                 NonlinearConfig(disable_nonlinearity=True))
        assert np.max(np.abs(r)) < 1e-10 * np.max(np.abs(wn) / dt)

    def test_quadratic_time_term(self):
        # u = t^2 uniform in space: u_tt - k (u^2)_tt = 2 - 12 k t^2
        k = 0.1
        params = PhysicalParams(c=1.0, b=1.0, k=k, rho0=1.0)
        dom = Domain.interval(0.0, 1.0, 8)
        n = dom.n_nodes
        g = BoundaryData(lambda t: np.full(2, t * t), lambda t: np.full(2, 2 * t))
        for dt in (0.1, 0.05):
            t0, t1 = 1.0, 1.0 + dt
            old = State(t0, np.full(n, t0 ** 2), np.full(n, 2 * t0), np.zeros((n, 1)))
            new = State(t1, np.full(n, t1 ** 2), np.full(n, 2 * t1), np.zeros((n, 1)))
            r = quasilinear_residual(new, old, g, params, dt, dom)
            tm = 0.5 * (t0 + t1)
            assert np.max(np.abs(r - (2 - 12 * k * tm ** 2))) < 4 * k * dt ** 2

    def test_degenerate_state_raises(self, line):
        params = PhysicalParams(c=1.0, b=1.0, k=0.5, rho0=1.0)
        n = line.n_nodes
        s = State(0.01, np.ones(n), np.zeros(n), np.zeros((n, 1)))
        with pytest.raises(DegeneracyError) as info:
            quasilinear_residual(s, s, None, params, 0.01, line)
        assert info.value.value == pytest.approx(0.0)
        assert info.value.exit_code == 3


class TestRun:
    def test_zero_data(self):
        traj = run_kuznetsov(mode_problem(0.0))
        assert not np.any(traj.u) and not np.any(traj.v)

    def test_disabled_nonlinearity_matches_linear(self):
        prob = mode_problem(0.3)
        nl = run_kuznetsov(prob, NonlinearConfig(disable_nonlinearity=True))
        lin = solve_linear(prob.as_linear())
        np.testing.assert_allclose(nl.u, lin.u, atol=1e-10)
        np.testing.assert_allclose(nl.ut, lin.ut, atol=1e-9)

    def test_deviation_from_linear_is_quadratic(self):
        devs = []
        for a in (1e-2, 5e-3):
            prob = mode_problem(a)
            nl = run_kuznetsov(prob, diagnostics=False)
            lin = solve_linear(prob.as_linear())
            devs.append(max(discrete_norm(x - y, prob.domain, 0) for x, y in zip(nl.u, lin.u)))
        assert 3.5 <= devs[0] / devs[1] <= 4.5

    def test_semi_implicit_close_to_newton(self):
        prob = mode_problem(0.05, dt=0.01)
        a = run_kuznetsov(prob, NonlinearConfig(scheme="newton"))
        b = run_kuznetsov(prob, NonlinearConfig(scheme="semi_implicit"))
        assert np.max(np.abs(a.u - b.u)) < 1e-3 * np.max(np.abs(a.u))

    def test_newton_counts_recorded(self):
        traj = run_kuznetsov(mode_problem(0.1))
        its = traj.diagnostics["newton_iterations"]
        assert its[0] == 0 and np.all(its[1:] >= 1) and np.all(its <= 25)

    def test_guard_holds_along_trajectory(self):
        traj = run_kuznetsov(mode_problem(0.4, t_end=0.5))
        assert traj.diagnostics["deg_min"].min() > 0.1

    def test_degeneracy_returns_partial(self):
        prob = mode_problem(0.3, params=PhysicalParams(c=1.0, b=0.05, k=1.0, rho0=1.0),
                            t_end=2.0)
        prob.u1 = 2.0 * prob.u0
        with pytest.raises(DegeneracyError) as info:
            run_kuznetsov(prob)
        part = info.value.partial
        assert isinstance(part, Trajectory)
        assert part.status.startswith("truncated")
        assert 0 < part.times[-1] < 2.0
        assert part.diagnostics["deg_min"].min() > 0.1

    def test_degenerate_initial_data(self):
        prob = mode_problem(0.525)
        with pytest.raises(DegeneracyError) as info:
            run_kuznetsov(prob)
        assert info.value.t == 0.0 and len(info.value.partial) == 1

    @pytest.mark.parametrize("sign", [0.5, 0.0, 2])
    def test_transport_sign_validated(self, sign):
        with pytest.raises(InvalidArgumentError):
            NonlinearConfig(transport_sign=sign)

    def test_transport_sign_matters_only_with_velocity(self):
        prob = mode_problem(0.05, n=16)
        runs = [run_kuznetsov(prob, NonlinearConfig(transport_sign=s), diagnostics=False)
                for s in (1.0, -1.0)]
        assert np.max(np.abs(runs[0].u - runs[1].u)) > 0
        prob.v0 = np.zeros_like(prob.v0)
        lin = KuznetsovProblem(prob.params, prob.domain, u0=prob.u0, t_end=0.04, dt=0.02)
        a, b = (run_kuznetsov(lin, NonlinearConfig(transport_sign=s), diagnostics=False)
                for s in (1.0, -1.0))
        # the first step has v = 0 at the old level, so signs agree to O(dt^2)
        assert np.max(np.abs(a.u[1] - b.u[1])) < 1e-6

    def test_square_runs(self):
        dom = Domain.rectangle(1.0, 1.0, 12)
        u0 = 0.05 * dom.sample(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
        traj = run_kuznetsov(KuznetsovProblem(NL, dom, u0=u0, t_end=0.2, dt=0.02))
        assert traj.status == "complete" and traj.v.shape == (11, dom.n_nodes, 2)


class TestJacobian:
    @pytest.mark.parametrize("sign", [1.0, -1.0])
    def test_matches_finite_differences(self, sign, rng):
        dom = Domain.rectangle(1.0, 1.0, 8)
        n = dom.n_nodes
        u = 0.1 * rng.standard_normal(n)
        w = 0.1 * rng.standard_normal(n)
        v = 0.1 * rng.standard_normal((n, 2))
        u[dom.boundary] = w[dom.boundary] = 0.0
        st = KuznetsovStepper(dom, NL, NonlinearConfig(transport_sign=sign), 0.02)
        z = np.zeros(len(dom.boundary))
        assert jacobian_check(st, State(0.0, u, w, v), z, z) < 1e-6


class TestVelocity:
    def test_integrate_velocity_affine(self, line):
        u = line.coords[:, 0].copy()
        v0 = np.full((line.n_nodes, 1), 0.25)
        params = PhysicalParams(rho0=2.0)
        v1 = integrate_velocity(v0, u, u, params, 0.1, line)
        np.testing.assert_allclose(v1, 0.25 - 0.1 / 2.0)

    def test_zero_field_keeps_velocity(self, line, unit_params):
        v0 = np.ones((line.n_nodes, 1))
        z = np.zeros(line.n_nodes)
        np.testing.assert_array_equal(integrate_velocity(v0, z, z, unit_params, 0.3, line), v0)

    def test_potential_representation(self):
        prob = mode_problem(0.05)
        prob.v0 = np.full_like(prob.v0, 0.2)
        traj = run_kuznetsov(prob)
        rep = velocity_from_potential(traj)
        assert np.max(np.abs(rep - traj.v)) < 1e-12


class TestVInfinity:
    def test_zero_field(self, line, unit_params):
        times = np.linspace(0, 1, 11)
        z = np.zeros((11, line.n_nodes))
        v = np.full((11, line.n_nodes, 1), 0.7)
        v_inf, tail = v_infinity(Trajectory(line, unit_params, times, z, z, v))
        np.testing.assert_array_equal(v_inf, 0.7)
        assert tail == 0.0

    def test_injected_exponential(self):
        dom = Domain.interval(0.0, math.pi, 200)
        times = np.arange(0, 20.0001, 0.01)
        traj = injected_trajectory(dom, PhysicalParams(), times)
        v_inf, tail = v_infinity(traj, tail="none")
        assert np.max(np.abs(v_inf[:, 0] + np.cos(dom.coords[:, 0]))) < 1e-3
        assert tail < 1e-6

    def test_pde_tail_exact_for_linear_run(self):
        # a long and a short run must agree on the limit
        prob_long = mode_problem(1.0, params=PhysicalParams(), t_end=30.0, dt=0.02)
        prob_short = mode_problem(1.0, params=PhysicalParams(), t_end=6.0, dt=0.02)
        cfg = NonlinearConfig(disable_nonlinearity=True)
        a = run_kuznetsov(prob_long, cfg).meta["v_inf"]
        b = run_kuznetsov(prob_short, cfg).meta["v_inf"]
        assert np.max(np.abs(a - b)) < 1e-8

    def test_no_limit(self, line, unit_params):
        times = np.linspace(0, 5, 51)
        u = np.tile(line.sample(np.sin), (51, 1)) * np.exp(0.2 * times)[:, None]
        with pytest.raises(NoLimitError):
            v_infinity(Trajectory(line, unit_params, times, u, 0.2 * u))

    def test_bad_tail_mode(self, line, unit_params):
        t = np.linspace(0, 1, 5)
        z = np.zeros((5, line.n_nodes))
        with pytest.raises(InvalidArgumentError):
            v_infinity(Trajectory(line, unit_params, t, z, z), tail="series")


def test_linear_problem_conversion_roundtrip():
    prob = mode_problem(0.1)
    lin = prob.as_linear()
    assert isinstance(lin, LinearProblem)
    np.testing.assert_array_equal(lin.u0, prob.u0)
    assert lin.dt == prob.dt and lin.t_end == prob.t_end
