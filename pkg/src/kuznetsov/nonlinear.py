"""Time integration of the quasilinear Kuznetsov system.

Unknowns per step are the interior values of ``w = u_t`` at the new time;
``u`` and the velocity ``v`` follow from the trapezoidal rule

    u_new = u_old + dt/2 (w_old + w_new)
    v_new = v_old - dt/(2 rho0) (grad u_old + grad u_new)

and the pressure equation is written in primal quasilinear form

    (1 - 2k u) u_tt - c^2 Lap u - b Lap u_t = 2k u_t^2 + 2/rho0 |grad u|^2 - 2 s v.grad u_t + f

where the right-hand side comes from expanding ``k (u^2)_tt + rho0 (v.v)_tt``
with ``v_t = -grad u / rho0``.  ``s = +1`` is that direct expansion;
``transport_sign = -1`` flips the transport term for comparison with the
opposite convention.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.sparse.linalg import splu

from . import kernels
from .diagnostics import check_compatibility, fit_decay_rate
from .domain import Domain, PhysicalParams, discrete_norm, validate_exponent
from .errors import (CompatibilityError, DegeneracyError, InvalidArgumentError,
                     NoLimitError, NumericalFailure)
from .linear import BoundaryData, State, Trajectory, _Recorder, compute_diagnostics
from .operators import dirichlet_operator, gradient, gradient_matrices

log = logging.getLogger(__name__)


@dataclass
class NonlinearConfig:
    scheme: str = "newton"
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    degeneracy_guard: float = 0.1
    disable_nonlinearity: bool = False
    forcing: Optional[Callable[[float], np.ndarray]] = None
    transport_sign: float = 1.0
    strict: bool = True
    p: float = 2.0
    compat_tol: Optional[float] = None
    sample_every: int = 1

    def __post_init__(self):
        if self.scheme not in ("newton", "semi_implicit"):
            raise InvalidArgumentError("scheme must be 'newton' or 'semi_implicit'")
        if not self.newton_tol > 0:
            raise InvalidArgumentError("newton_tol must be positive")
        if not 0 < self.degeneracy_guard < 1:
            raise InvalidArgumentError("degeneracy_guard must lie in (0, 1)")
        if self.transport_sign not in (1.0, -1.0, 1, -1):
            raise InvalidArgumentError("transport_sign must be +1 or -1")


@dataclass
class KuznetsovProblem:
    """Initial-boundary data ``(g, u0, u1, v0)`` plus discretisation."""

    params: PhysicalParams
    domain: Domain
    g: Optional[BoundaryData] = None
    u0: Optional[np.ndarray] = None
    u1: Optional[np.ndarray] = None
    v0: Optional[np.ndarray] = None
    t_end: float = 1.0
    dt: float = 0.01

    def __post_init__(self):
        if not self.dt > 0 or not self.t_end >= self.dt:
            raise InvalidArgumentError("need dt > 0 and t_end >= dt")
        d = self.domain
        if self.g is None:
            self.g = BoundaryData.zero(d)
        self.u0 = np.zeros(d.n_nodes) if self.u0 is None else np.asarray(self.u0, dtype=float)
        self.u1 = np.zeros(d.n_nodes) if self.u1 is None else np.asarray(self.u1, dtype=float)
        if self.v0 is None:
            self.v0 = np.zeros((d.n_nodes, d.dim))
        self.v0 = np.asarray(self.v0, dtype=float).reshape(d.n_nodes, d.dim)

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def initial_state(self):
        u = self.u0.copy()
        ut = self.u1.copy()
        u[self.domain.boundary] = self.g.value(0.0)
        ut[self.domain.boundary] = self.g.rate(0.0)
        return State(0.0, u, ut, self.v0.copy())

    def scaled(self, s):
        return replace(self, g=self.g.scaled(s), u0=s * self.u0, u1=s * self.u1, v0=s * self.v0)

    def perturbed(self, delta, direction):
        """``self + delta * direction``; ``direction`` needs ``g, u0, u1, v0`` (``None`` = zero)."""
        d = self.domain
        dg = direction.g if getattr(direction, "g", None) is not None else BoundaryData.zero(d)
        zero = np.zeros(d.n_nodes)
        du0 = zero if getattr(direction, "u0", None) is None else direction.u0
        du1 = zero if getattr(direction, "u1", None) is None else direction.u1
        dv0 = 0.0 if getattr(direction, "v0", None) is None else direction.v0
        return replace(self, g=self.g.plus(dg.scaled(delta)), u0=self.u0 + delta * du0,
                       u1=self.u1 + delta * du1, v0=self.v0 + delta * np.asarray(dv0))

    def as_linear(self, strict=True, p=2.0, compat_tol=None, sample_every=1):
        from .linear import LinearProblem

        return LinearProblem(self.params, self.domain, g=self.g, u0=self.u0, u1=self.u1,
                             t_end=self.t_end, dt=self.dt, strict=strict, p=p,
                             compat_tol=compat_tol, sample_every=sample_every)


# ---------------------------------------------------------------- velocity

def integrate_velocity(v_old, u_old, u_new, params: PhysicalParams, dt, domain: Domain):
    """Trapezoidal step of ``v_t = -grad u / rho0``."""
    return v_old - (0.5 * dt / params.rho0) * (gradient(u_old, domain) + gradient(u_new, domain))


def velocity_from_potential(trajectory: Trajectory, U0=None):
    """Velocity as ``-grad(int_0^t u ds + U0) / rho0``.

    With ``U0`` omitted the result is shifted by the stored ``v0`` instead,
    which is the same thing when ``v0 = -grad U0 / rho0``.
    """
    traj = trajectory
    rho0 = traj.params.rho0
    prim = cumulative_trapezoid(traj.u, traj.times, axis=0, initial=0.0)
    if U0 is not None:
        prim = prim + np.asarray(U0)[None, :]
    out = np.array([-gradient(a, traj.domain) / rho0 for a in prim])
    if U0 is None and traj.v is not None:
        out += traj.v[0][None]
    return out


def v_infinity(trajectory: Trajectory, params: Optional[PhysicalParams] = None, window=None,
               tail="pde", boundary: Optional[BoundaryData] = None, transport_sign=1.0,
               nonlinear=True):
    """Limit velocity ``v_inf = v0 - int_0^inf grad u ds / rho0``.

    The integral up to the final time ``T`` is the stored ``v(T)`` (or, for
    trajectories without velocity, the trapezoidal integral of ``grad u``).
    With ``tail="pde"`` the remainder ``U = int_T^inf u ds`` is obtained by
    integrating the equation over ``[T, inf)``, which gives the elliptic
    problem

        c^2 Lap U = -u_t + b Lap u + 2k u u_t - 2 s v.grad u     (at t = T)

    with ``U = int_T^inf g ds`` on the boundary (zero when ``boundary`` is
    omitted).  This holds exactly for the linear trapezoidal scheme and up to
    higher-order terms otherwise; ``nonlinear=False`` drops the quadratic
    terms, matching a run with the nonlinearity disabled.  ``tail="none"``
    drops the remainder.

    Returns ``(v_inf, tail_size)``: the sup-norm of the applied correction
    (``"pde"``) or, for ``"none"``, the bound ``G(T) / (rho0 * rate)`` with
    ``rate`` the fitted decay rate of ``||grad u||_{L_2}`` and ``G(T)`` the
    larger of the last sample and the fitted envelope.  Raises
    :class:`NoLimitError` if ``grad u`` does not decay (for ``"none"``, also
    if its decay is not cleanly exponential).
    """
    if tail not in ("pde", "none"):
        raise InvalidArgumentError("tail must be 'pde' or 'none'")
    traj = trajectory
    params = params or traj.params
    d = traj.domain
    v0 = traj.v[0] if traj.v is not None else np.zeros((d.n_nodes, d.dim))
    grads = np.array([gradient(a, d) for a in traj.u])
    if not np.any(grads):
        return v0.copy(), 0.0
    if traj.v is not None:
        v_T = traj.v[-1].copy()
    else:
        v_T = v0 - trapezoid(grads, traj.times, axis=0) / params.rho0
    series = np.array([discrete_norm(gr, d, 0) for gr in grads])
    try:
        fit = fit_decay_rate(traj.times, series, window=window, envelope=True)
    except InvalidArgumentError as exc:
        raise NoLimitError(f"cannot fit decay of grad u: {exc}") from exc
    # the equation-based tail only needs decay; the series bound needs a trustworthy fit
    if fit.rate <= 0 or (tail == "none" and not fit.valid):
        why = "does not decay" if fit.rate <= 0 else f"has no clean exponential fit (rms {fit.residual:.3g})"
        raise NoLimitError(f"grad u {why}; fitted rate {fit.rate:.3g}",
                           payload={"fit": fit, "v_inf": v_T})
    if tail == "none":
        t_max = traj.times[-1]
        g_end = max(series[-1], math.exp(fit.intercept - fit.rate * t_max))
        return v_T, float(g_end / (params.rho0 * fit.rate))
    U = _tail_potential(traj, params, boundary, transport_sign, nonlinear)
    corr = gradient(U, d) / params.rho0
    return v_T - corr, float(np.max(np.abs(corr)))


def _tail_potential(traj: Trajectory, params: PhysicalParams, boundary, sign, nonlinear=True):
    d = traj.domain
    ii, bb = d.interior, d.boundary
    op = dirichlet_operator(d)
    u, w = traj.u[-1], traj.ut[-1]
    T = float(traj.times[-1])
    U = np.zeros(d.n_nodes)
    if boundary is not None:
        from scipy.integrate import quad_vec

        U[bb] = quad_vec(boundary.value, T, np.inf)[0]
    rhs = -w[ii] + params.b * (op.A @ u[ii] + op.B @ u[bb])
    if nonlinear and params.k:
        rhs += 2.0 * params.k * u[ii] * w[ii]
    if nonlinear and traj.v is not None:
        rhs -= 2.0 * sign * np.einsum("nd,nd->n", traj.v[-1], gradient(u, d))[ii]
    U[ii] = splu(op.A.tocsc()).solve(rhs / params.c ** 2 - op.B @ U[bb])
    return U


# ---------------------------------------------------------------- residual

def quasilinear_residual(state_new: State, state_old: State, g: Optional[BoundaryData],
                         params: PhysicalParams, dt, domain: Domain,
                         config: Optional[NonlinearConfig] = None, f_old=None, f_new=None):
    """Interior residual of the trapezoidal discretisation between two states.

    With ``g`` given, the boundary values of ``state_new`` are replaced by
    ``g(t_new)`` and ``g_t(t_new)`` first.  Raises :class:`DegeneracyError`
    if ``1 - 2k u`` at the new state reaches the guard.
    """
    config = config or NonlinearConfig()
    stepper = KuznetsovStepper(domain, params, config, dt)
    if g is not None:
        state_new = state_new.copy()
        state_new.u[domain.boundary] = g.value(state_new.t)
        state_new.ut[domain.boundary] = g.rate(state_new.t)
    return stepper.residual_between(state_old, state_new, f_old, f_new)


class KuznetsovStepper:
    """Assembled operators and the residual/Jacobian of one time step."""

    def __init__(self, domain: Domain, params: PhysicalParams, config: NonlinearConfig, dt):
        self.domain, self.params, self.config, self.dt = domain, params, config, float(dt)
        op = dirichlet_operator(domain)
        self.A, self.B = op.A, op.B
        ii = domain.interior
        self.G = gradient_matrices(domain)
        self.P = [G[ii][:, ii].tocsr() for G in self.G]
        self.k = 0.0 if config.disable_nonlinearity else params.k
        self.nonlinear = not config.disable_nonlinearity
        self.sign = float(config.transport_sign)
        self.inv_rho = 1.0 / params.rho0
        self._prev_w = None
        self._lin_lu = None

    # -- pieces -----------------------------------------------------------
    def guard(self, u, t):
        fac = 1.0 - 2.0 * self.k * u
        i = int(np.argmin(fac))
        if fac[i] <= self.config.degeneracy_guard:
            raise DegeneracyError(
                f"degeneracy factor 1-2ku = {fac[i]:.4g} <= guard {self.config.degeneracy_guard}"
                f" at node {i} (x={self.domain.coords[i].tolist()}), t={t:.4g}",
                node=i, value=float(fac[i]), t=t)

    def source(self, u, w, v):
        if not self.nonlinear:
            return np.zeros(self.domain.n_nodes)
        gu = gradient(u, self.domain)
        gw = gradient(w, self.domain)
        return kernels.quadratic_source(w, gu, gw, v, self.k, self.inv_rho, self.sign)

    def _new_fields(self, old: State, wi, g1, gt1):
        d = self.domain
        ii = d.interior
        w = np.empty(d.n_nodes)
        w[ii], w[d.boundary] = wi, gt1
        u = np.empty(d.n_nodes)
        u[ii] = old.u[ii] + 0.5 * self.dt * (old.ut[ii] + wi)
        u[d.boundary] = g1
        v = old.v - (0.5 * self.dt * self.inv_rho) * (gradient(old.u, d) + gradient(u, d))
        return u, w, v

    def residual_between(self, old: State, new: State, f_old=None, f_new=None, n_old=None):
        d = self.domain
        ii, bb = d.interior, d.boundary
        dt = self.dt
        p = self.params
        self.guard(new.u, new.t)
        coef = 1.0 - self.k * (old.u[ii] + new.u[ii])
        lap_u = self.A @ (old.u[ii] + new.u[ii]) + self.B @ (old.u[bb] + new.u[bb])
        lap_w = self.A @ (old.ut[ii] + new.ut[ii]) + self.B @ (old.ut[bb] + new.ut[bb])
        if n_old is None:
            n_old = self.source(old.u, old.ut, old.v)
        n_new = self.source(new.u, new.ut, new.v)
        r = (coef * (new.ut[ii] - old.ut[ii]) / dt - 0.5 * p.c ** 2 * lap_u - 0.5 * p.b * lap_w
             - 0.5 * (n_old[ii] + n_new[ii]))
        if f_old is not None:
            r -= 0.5 * (f_old[ii] + f_new[ii])
        return r

    def residual(self, old: State, wi, g1, gt1, t1, f_old=None, f_new=None, n_old=None):
        u, w, v = self._new_fields(old, wi, g1, gt1)
        new = State(t1, u, w, v)
        return self.residual_between(old, new, f_old, f_new, n_old), new

    def jacobian(self, old: State, new: State):
        """Exact derivative of :meth:`residual` w.r.t. the interior ``w_new``."""
        d = self.domain
        ii = d.interior
        dt = self.dt
        p = self.params
        wi_new, wi_old = new.ut[ii], old.ut[ii]
        coef = 1.0 - self.k * (old.u[ii] + new.u[ii])
        diag = coef / dt - 0.5 * self.k * (wi_new - wi_old)
        J = sp.diags(diag) - (0.25 * p.c ** 2 * dt + 0.5 * p.b) * self.A
        if self.nonlinear:
            gu = gradient(new.u, d)[ii]
            gw = gradient(new.ut, d)[ii]
            vv = new.v[ii]
            Jn = sp.diags(4.0 * self.k * wi_new)
            for ax, P in enumerate(self.P):
                q = (2.0 * self.inv_rho * dt * gu[:, ax] - 2.0 * self.sign * vv[:, ax]
                     + self.sign * dt ** 2 * self.inv_rho * 0.5 * gw[:, ax])
                Jn = Jn + sp.diags(q) @ P
            J = J - 0.5 * Jn
        return J.tocsc()

    # -- schemes ----------------------------------------------------------
    def step_newton(self, old: State, g1, gt1, f_old=None, f_new=None):
        cfg = self.config
        ii = self.domain.interior
        t1 = old.t + self.dt
        n_old = self.source(old.u, old.ut, old.v)
        wi = old.ut[ii].copy()
        if self._prev_w is not None:
            wi = 2.0 * old.ut[ii] - self._prev_w
        trace = []
        for it in range(1, cfg.newton_max_iter + 1):
            r, new = self.residual(old, wi, g1, gt1, t1, f_old, f_new, n_old)
            rn = float(np.max(np.abs(r), initial=0.0))
            trace.append(rn)
            if rn < cfg.newton_tol:
                self._prev_w = old.ut[ii].copy()
                return new, it - 1
            J = self.jacobian(old, new)
            try:
                delta = splu(J).solve(-r)
            except RuntimeError as exc:
                raise NumericalFailure(f"Jacobian solve failed: {exc}", payload=trace) from exc
            if not np.all(np.isfinite(delta)):
                raise NumericalFailure("Newton update not finite", payload=trace)
            wi = wi + delta
            if np.max(np.abs(delta)) <= 4 * np.finfo(float).eps * (1.0 + np.max(np.abs(wi))):
                r, new = self.residual(old, wi, g1, gt1, t1, f_old, f_new, n_old)
                trace.append(float(np.max(np.abs(r), initial=0.0)))
                self._prev_w = old.ut[ii].copy()
                return new, it
        raise NumericalFailure(
            f"Newton did not converge in {cfg.newton_max_iter} iterations at t={t1:.4g}",
            payload={"residual_trace": trace})

    def step_semi_implicit(self, old: State, g1, gt1, f_old=None, f_new=None):
        """One linear solve with coefficients frozen at a predicted midpoint.

        The midpoint state is extrapolated from the old state (and the
        previous ``w`` when available), so nothing depends on the unknown.
        """
        d = self.domain
        ii, bb = d.interior, d.boundary
        dt = self.dt
        p = self.params
        t1 = old.t + dt
        self.guard(old.u, old.t)
        u_mid = old.u + 0.5 * dt * old.ut
        if self._prev_w is not None:
            w_mid = old.ut.copy()
            w_mid[ii] = 1.5 * old.ut[ii] - 0.5 * self._prev_w
        else:
            w_mid = old.ut.copy()
        v_mid = old.v - (0.5 * dt * self.inv_rho) * gradient(old.u, d)
        coef = 1.0 - 2.0 * self.k * u_mid[ii]
        if np.min(coef) <= self.config.degeneracy_guard:
            self.guard(u_mid, old.t + 0.5 * dt)

        def linear_residual(wi):
            u, w, v = self._new_fields(old, wi, g1, gt1)
            lap_u = self.A @ (old.u[ii] + u[ii]) + self.B @ (old.u[bb] + u[bb])
            lap_w = self.A @ (old.ut[ii] + wi) + self.B @ (old.ut[bb] + gt1)
            r = coef * (wi - old.ut[ii]) / dt - 0.5 * p.c ** 2 * lap_u - 0.5 * p.b * lap_w
            if self.nonlinear:
                w_bar = 0.5 * (old.ut + w)
                u_bar = 0.5 * (old.u + u)
                gu_mid = gradient(u_mid, d)
                nsrc = (2.0 * self.k * w_mid * w_bar
                        + 2.0 * self.inv_rho * np.sum(gu_mid * gradient(u_bar, d), axis=1)
                        - 2.0 * self.sign * np.sum(v_mid * gradient(w_bar, d), axis=1))
                r = r - nsrc[ii]
            if f_old is not None:
                r = r - 0.5 * (f_old[ii] + f_new[ii])
            return r, State(t1, u, w, v)

        M = sp.diags(coef / dt) - (0.25 * p.c ** 2 * dt + 0.5 * p.b) * self.A
        if self.nonlinear:
            gu_mid = gradient(u_mid, d)[ii]
            Mn = sp.diags(self.k * w_mid[ii])
            for ax, P in enumerate(self.P):
                q = 0.5 * self.inv_rho * dt * gu_mid[:, ax] - self.sign * v_mid[ii, ax]
                Mn = Mn + sp.diags(q) @ P
            M = M - Mn
        w0 = old.ut[ii].copy()
        r0, _ = linear_residual(w0)
        try:
            wi = w0 + splu(M.tocsc()).solve(-r0)
        except RuntimeError as exc:
            raise NumericalFailure(f"semi-implicit solve failed: {exc}") from exc
        _, new = linear_residual(wi)
        self.guard(new.u, t1)
        self._prev_w = old.ut[ii].copy()
        return new, 1

    def step(self, old: State, g1, gt1, f_old=None, f_new=None):
        if self.config.scheme == "newton":
            return self.step_newton(old, g1, gt1, f_old, f_new)
        return self.step_semi_implicit(old, g1, gt1, f_old, f_new)


def step_kuznetsov(state: State, g: BoundaryData, params: PhysicalParams,
                   config: NonlinearConfig, dt, domain: Domain, stepper=None):
    """Advance one step; returns ``(new_state, iterations)``."""
    stepper = stepper or KuznetsovStepper(domain, params, config, dt)
    t1 = state.t + dt
    f_old = f_new = None
    if config.forcing is not None:
        f_old, f_new = np.asarray(config.forcing(state.t)), np.asarray(config.forcing(t1))
    return stepper.step(state, g.value(t1), g.rate(t1), f_old, f_new)


# ---------------------------------------------------------------- driver

def validate_problem(problem: KuznetsovProblem, config: NonlinearConfig):
    validate_exponent(config.p, problem.domain.dim)
    report = check_compatibility(problem.g, problem.u0, problem.u1, config.p, problem.domain,
                                 tol=config.compat_tol)
    if not report.ok:
        msg = f"incompatible data: max violation {report.max_violation:.3e}"
        if config.strict:
            raise CompatibilityError(msg, report)
        log.warning(msg)
    return report


def run_kuznetsov(problem: KuznetsovProblem, config: Optional[NonlinearConfig] = None,
                  validate=True, diagnostics=True) -> Trajectory:
    """Integrate the Kuznetsov system to ``problem.t_end``.

    A :class:`DegeneracyError` (including one at ``t = 0``) or an interrupt
    carries the trajectory up to the last accepted step in ``partial``.
    """
    config = config or NonlinearConfig()
    if validate:
        validate_problem(problem, config)
    d = problem.domain
    stepper = KuznetsovStepper(d, problem.params, config, problem.dt)
    state = problem.initial_state()
    rec = _Recorder(config.sample_every)
    rec.add(0, state, newton_iterations=0)
    meta = {"solver": "kuznetsov", "scheme": config.scheme, "dt": problem.dt,
            "transport_sign": config.transport_sign,
            "disable_nonlinearity": config.disable_nonlinearity}

    def finish(status):
        traj = rec.build(d, problem.params, status=status, meta=meta)
        if diagnostics:
            _finalise(traj, config, problem.g)
        return traj

    n = problem.n_steps
    try:
        stepper.guard(state.u, 0.0)
        for step in range(1, n + 1):
            new, iters = step_kuznetsov(state, problem.g, problem.params, config, problem.dt,
                                        d, stepper)
            new.t = step * problem.dt
            state = new
            rec.add(step, state, force=(step == n), newton_iterations=iters)
    except DegeneracyError as exc:
        exc.partial = finish(f"truncated: degeneracy at t={exc.t}")
        raise
    except NumericalFailure as exc:
        exc.payload = {"detail": exc.payload, "partial": finish("truncated: numerical failure")}
        raise
    except KeyboardInterrupt as exc:
        exc.partial = finish(f"truncated: interrupted at t={state.t}")
        raise
    return finish("complete")


def _finalise(traj: Trajectory, config: NonlinearConfig, boundary=None):
    v_ref = None
    if len(traj) >= 8:
        try:
            v_ref, tail = v_infinity(traj, traj.params, boundary=boundary,
                                     transport_sign=config.transport_sign,
                                     nonlinear=not config.disable_nonlinearity)
            traj.meta["v_inf_tail_bound"] = tail
        except NoLimitError as exc:
            traj.meta["v_inf_error"] = str(exc)
    if v_ref is not None:
        traj.meta["v_inf"] = v_ref
    compute_diagnostics(traj, p=config.p, v_ref=v_ref)
    return traj
