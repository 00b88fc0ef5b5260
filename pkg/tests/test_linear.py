import math
import warnings

import numpy as np
import pytest
import sympy as sy

from kuznetsov import Domain, PhysicalParams
from kuznetsov.diagnostics import fit_decay_rate
from kuznetsov.errors import CompatibilityError, InvalidArgumentError, TruncationError
from kuznetsov.experiments import lift_identity_residual
from kuznetsov.linear import (BoundaryData, LinearProblem, direct_lift, heat_solve,
                              lift_boundary, modal_roots, modal_solution_1d, solve_linear)
from kuznetsov.scenarios import BoundarySpec, build_boundary


def manufactured_forcing(c, b):
    """Symbolic ``u_tt - c^2 u_xx - b u_xxt`` for ``u = exp(-t) sin x``, as a numpy callable."""
    t, x = sy.symbols("t x")
    u = sy.exp(-t) * sy.sin(x)
    f = sy.diff(u, t, 2) - c ** 2 * sy.diff(u, x, 2) - b * sy.diff(u, x, 2, t, 1)
    return sy.lambdify((t, x), sy.simplify(f), "numpy")


class TestSolveLinear:
    def test_zero_data_stays_zero(self, line, unit_params):
        traj = solve_linear(LinearProblem(unit_params, line, t_end=1.0, dt=0.1))
        assert not np.any(traj.u) and not np.any(traj.ut)

    @pytest.mark.parametrize("c, b", [(1.0, 1.0), (1.0, 4.0), (2.0, 0.3)])
    def test_single_mode_matches_semidiscrete_oracle(self, c, b):
        params = PhysicalParams(c=c, b=b)
        dom = Domain.interval(0.0, math.pi, 32)
        x = dom.coords[:, 0]
        prob = LinearProblem(params, dom, u0=np.sin(2 * x), u1=0.3 * np.sin(2 * x),
                             t_end=2.0, dt=0.002)
        traj = solve_linear(prob)
        lam = (2 / dom.hmax ** 2) * (1 - math.cos(2 * dom.hmax))
        amp, rate = modal_solution_1d(2, params, 1.0, 0.3, traj.times, lam=lam)
        np.testing.assert_allclose(traj.u, amp[:, None] * np.sin(2 * x), atol=2e-5)
        np.testing.assert_allclose(traj.ut, rate[:, None] * np.sin(2 * x), atol=2e-4)

    def test_manufactured_solution_second_order(self):
        c, b = 1.2, 0.5
        f_sym = manufactured_forcing(c, b)
        params = PhysicalParams(c=c, b=b)
        errs = []
        for n, dt in ((16, 0.1), (32, 0.05), (64, 0.025)):
            dom = Domain.interval(0.0, math.pi, n)
            x = dom.coords[:, 0]
            prob = LinearProblem(params, dom, f=lambda t, x=x: f_sym(t, x) + 0 * x,
                                 u0=np.sin(x), u1=-np.sin(x), t_end=1.0, dt=dt)
            traj = solve_linear(prob)
            exact = np.exp(-traj.times)[:, None] * np.sin(x)[None, :]
            errs.append(np.max(np.abs(traj.u - exact)))
        orders = [math.log2(a / e) for a, e in zip(errs, errs[1:])]
        assert all(1.8 <= o <= 2.2 for o in orders), orders

    def test_affine_steady_state_is_exact(self, unit_params):
        dom = Domain.rectangle(1.0, 1.0, 12)
        fn = lambda t, x, y: 1.0 + x - 2 * y
        g = BoundaryData.from_function(dom, fn, lambda t, x, y: 0.0 * x)
        u0 = dom.sample(lambda x, y: fn(0.0, x, y))
        traj = solve_linear(LinearProblem(unit_params, dom, g=g, u0=u0, t_end=1.0, dt=0.1))
        assert np.max(np.abs(traj.u - u0)) < 1e-12

    def test_backward_euler_first_order(self, unit_params):
        dom = Domain.interval(0.0, math.pi, 32)
        x = dom.coords[:, 0]
        lam = (2 / dom.hmax ** 2) * (1 - math.cos(dom.hmax))
        errs = []
        for dt in (0.02, 0.01):
            traj = solve_linear(LinearProblem(unit_params, dom, u0=np.sin(x), t_end=1.0, dt=dt,
                                              scheme="backward_euler"))
            amp, _ = modal_solution_1d(1, unit_params, 1.0, 0.0, traj.times, lam=lam)
            errs.append(np.max(np.abs(traj.u - amp[:, None] * np.sin(x))))
        assert 0.8 <= math.log2(errs[0] / errs[1]) <= 1.2

    def test_superposition_and_scaling(self, unit_params, rng):
        dom = Domain.interval(0.0, math.pi, 40)
        x = dom.coords[:, 0]
        base = dict(t_end=1.0, dt=0.05)

        def run(u0, u1, amp):
            g = BoundaryData(lambda t: amp * np.array([t ** 2, 0.0]),
                             lambda t: amp * np.array([2 * t, 0.0]))
            return solve_linear(LinearProblem(unit_params, dom, g=g, u0=u0, u1=u1, **base))

        a0 = np.sin(x) * rng.standard_normal()
        a1 = np.sin(3 * x) * rng.standard_normal()
        ta = run(a0, a1, 0.0)
        tb = run(0 * x, np.sin(2 * x), 1.0)
        tab = run(a0, a1 + np.sin(2 * x), 1.0)
        np.testing.assert_allclose(tab.u, ta.u + tb.u, atol=1e-12)
        t3 = run(3 * a0, 3 * a1, 0.0)
        np.testing.assert_allclose(t3.u, 3 * ta.u, atol=1e-12)

    def test_decay_rate_mode_one(self, unit_params):
        dom = Domain.interval(0.0, math.pi, 64)
        traj = solve_linear(LinearProblem(unit_params, dom, u0=dom.sample(np.sin),
                                          t_end=30.0, dt=0.02))
        fit = fit_decay_rate(traj.times, traj.diagnostics["u_W2p"], envelope=True)
        assert fit.valid
        assert fit.rate == pytest.approx(0.5, abs=0.02)

    def test_bad_arguments(self, line, unit_params):
        with pytest.raises(InvalidArgumentError):
            LinearProblem(unit_params, line, dt=0.0)
        with pytest.raises(InvalidArgumentError):
            LinearProblem(unit_params, line, dt=0.1, t_end=0.01)
        with pytest.raises(InvalidArgumentError):
            LinearProblem(unit_params, line, scheme="leapfrog")
        with pytest.raises(InvalidArgumentError):
            LinearProblem(unit_params, line, u0=np.zeros(3))


class TestCompatibility:
    def _problem(self, strict, params):
        dom = Domain.interval(0.0, math.pi, 32)
        g = BoundaryData(lambda t: np.ones(2), lambda t: np.zeros(2))
        return LinearProblem(params, dom, g=g, u0=dom.sample(np.sin), t_end=0.2, dt=0.1,
                             strict=strict)

    def test_strict_raises(self, unit_params):
        with pytest.raises(CompatibilityError) as info:
            solve_linear(self._problem(True, unit_params))
        assert info.value.report.order0_ok is False
        assert info.value.exit_code == 2

    def test_permissive_warns_and_runs(self, unit_params):
        with pytest.warns(UserWarning, match="incompatible"):
            traj = solve_linear(self._problem(False, unit_params))
        assert traj.status == "complete"
        np.testing.assert_allclose(traj.u[:, [0, -1]], 1.0)


class TestModalRoots:
    def test_complex_pair(self):
        mu1, mu2 = modal_roots(PhysicalParams(c=1.0, b=1.0), 1.0)
        assert mu1 == pytest.approx(complex(-0.5, math.sqrt(3) / 2))
        assert mu2 == pytest.approx(complex(-0.5, -math.sqrt(3) / 2))

    def test_real_pair(self):
        mu1, mu2 = modal_roots(PhysicalParams(c=1.0, b=1.0), 9.0)
        assert mu1.imag == mu2.imag == 0.0
        assert mu1.real == pytest.approx(-1.1458980, abs=1e-6)
        assert mu2.real == pytest.approx(-7.8541020, abs=1e-6)

    @pytest.mark.parametrize("c, b, lam", [(1.0, 1.0, 1.0), (1.0, 0.5, 16.0), (1.0, 1.0, 4.0)])
    def test_solution_solves_ode(self, c, b, lam):
        params = PhysicalParams(c=c, b=b)
        t = np.linspace(0, 3, 3001)
        amp, rate = modal_solution_1d(1, params, 0.7, -0.2, t, lam=lam)
        assert amp[0] == pytest.approx(0.7) and rate[0] == pytest.approx(-0.2)
        acc = np.gradient(rate, t)
        res = acc + b * lam * rate + c * c * lam * amp
        assert np.max(np.abs(res[5:-5])) < 1e-3 * (1 + np.max(np.abs(acc)))
        np.testing.assert_allclose(np.gradient(amp, t)[5:-5], rate[5:-5], atol=1e-4)

    def test_zero_data(self, unit_params):
        amp, rate = modal_solution_1d(1, unit_params, 0.0, 0.0, np.linspace(0, 1, 5))
        assert not np.any(amp) and not np.any(rate)

    def test_invalid_mode(self, unit_params):
        with pytest.raises(InvalidArgumentError):
            modal_solution_1d(0, unit_params, 1.0, 0.0, [0.0])


class TestHeat:
    def test_sine_decay(self):
        params = PhysicalParams(c=1.0, b=1.0)
        dom = Domain.interval(0.0, math.pi, 64)
        traj = heat_solve(params, dom, u_init=dom.sample(np.sin), dt=0.01, t_end=1.0)
        exact = np.exp(-traj.times)[:, None] * np.sin(dom.coords[:, 0])[None, :]
        assert np.max(np.abs(traj.u - exact)) < 0.01 + dom.hmax ** 2

    def test_manufactured_parabola(self):
        params = PhysicalParams(c=1.0, b=0.7)
        dom = Domain.interval(0.0, math.pi, 16)
        x = dom.coords[:, 0]
        q = x * (math.pi - x)
        f = lambda t: np.exp(-t) * (2 * params.b - q)
        errs = []
        for dt in (0.05, 0.025):
            traj = heat_solve(params, dom, f=f, u_init=q, dt=dt, t_end=1.0)
            errs.append(np.max(np.abs(traj.u - np.exp(-traj.times)[:, None] * q)))
        assert errs[1] < errs[0] / 3.5


class TestLift:
    params = PhysicalParams(c=1.0, b=1.0)

    def _bump(self, dom):
        return build_boundary(BoundarySpec(family="bump", amplitude=1.0, support_end=1.0), dom)[0]

    def test_zero_boundary_gives_zero_lift(self, line):
        lifted = lift_boundary(BoundaryData.zero(line), self.params, line, 0.01, 2.0)
        assert not np.any(lifted.u)

    def test_matches_direct_integration(self):
        dom = Domain.interval(0.0, math.pi, 64)
        g = self._bump(dom)
        lifted = lift_boundary(g, self.params, dom, 0.005, 16.0)
        direct = direct_lift(g, self.params, dom, 0.005, 16.0)
        scale = np.max(np.abs(direct.u))
        assert np.max(np.abs(lifted.u - direct.u)) / scale < 1e-3
        assert lift_identity_residual(lifted, g, self.params) < 1e-2

    def test_trace(self):
        dom = Domain.interval(0.0, math.pi, 32)
        g = self._bump(dom)
        lifted = lift_boundary(g, self.params, dom, 0.01, 16.0)
        trace = np.array([g.value(t) for t in lifted.times])
        assert np.max(np.abs(lifted.u[:, dom.boundary] - trace)) < 1e-3

    def test_truncation_error(self):
        dom = Domain.interval(0.0, math.pi, 32)
        with pytest.raises(TruncationError) as info:
            lift_boundary(self._bump(dom), self.params, dom, 0.01, 1.5, tol=1e-8)
        assert info.value.payload.meta["tail_bound"] > 1e-8

    def test_rejects_nonzero_start(self, line):
        g = BoundaryData(lambda t: np.ones(2), lambda t: np.zeros(2))
        with pytest.raises(InvalidArgumentError):
            lift_boundary(g, self.params, line, 0.01, 1.0)


def test_boundary_data_support_and_sum():
    g = BoundaryData(lambda t: np.array([t, 2 * t]), None, support_end=1.0)
    h = BoundaryData(lambda t: np.array([1.0, 1.0]), lambda t: np.zeros(2))
    np.testing.assert_allclose(g.rate(0.5), [1.0, 2.0], rtol=1e-6)
    assert not np.any(g.value(1.5))
    s = g.plus(h)
    assert s.support_end is None
    np.testing.assert_allclose(s.value(0.5), [1.5, 2.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        np.testing.assert_allclose(g.scaled(-2).value(0.25), [-0.5, -1.0])
