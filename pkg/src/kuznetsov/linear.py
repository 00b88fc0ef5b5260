"""Linear strongly damped wave equation, heat problem and boundary lifting.

The damped wave equation ``u_tt - c^2 Lap u - b Lap u_t = f`` is integrated
as the first-order system ``(u, w = u_t)``.  With the trapezoidal rule the
``u`` update can be substituted into the ``w`` equation, so each step costs
one solve with the constant matrix ``I - alpha*A``, factorised once.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import splu

from .domain import Domain, NormOrder, PhysicalParams, discrete_norm, numeric_lambda0
from .errors import (CompatibilityError, InvalidArgumentError, NumericalFailure,
                     TruncationError)
from .operators import dirichlet_operator

log = logging.getLogger(__name__)

SCHEMES = ("trapezoidal", "backward_euler")


# ---------------------------------------------------------------- data types

@dataclass
class BoundaryData:
    """Dirichlet data ``g(t)`` on the boundary nodes and its time derivative.

    ``g`` and ``gt`` map a time to an array over ``domain.boundary``.  When
    ``gt`` is missing it is replaced by a central difference of ``g``.  With
    ``support_end`` set both vanish identically for ``t > support_end``.
    """

    g: Callable[[float], np.ndarray]
    gt: Optional[Callable[[float], np.ndarray]] = None
    support_end: Optional[float] = None
    fd_step: float = 1e-6

    def value(self, t):
        if self.support_end is not None and t > self.support_end:
            return np.zeros_like(np.asarray(self.g(0.0), dtype=float))
        return np.asarray(self.g(t), dtype=float)

    def rate(self, t):
        if self.support_end is not None and t > self.support_end:
            return np.zeros_like(np.asarray(self.g(0.0), dtype=float))
        if self.gt is not None:
            return np.asarray(self.gt(t), dtype=float)
        e = self.fd_step
        return (np.asarray(self.g(t + e), dtype=float) - np.asarray(self.g(t - e), dtype=float)) / (2 * e)

    @classmethod
    def zero(cls, domain: Domain):
        nb = len(domain.boundary)
        z = lambda t: np.zeros(nb)
        return cls(z, z)

    @classmethod
    def from_function(cls, domain: Domain, func, dfunc=None, support_end=None):
        """``func(t, *coords)`` evaluated at the boundary trace points."""
        pts = domain.boundary_points()
        cols = [pts[:, d] for d in range(domain.dim)]
        nb = len(pts)

        def g(t):
            return np.broadcast_to(np.asarray(func(t, *cols), dtype=float), (nb,)).copy()

        def gt(t):
            return np.broadcast_to(np.asarray(dfunc(t, *cols), dtype=float), (nb,)).copy()

        return cls(g, None if dfunc is None else gt, support_end)

    def scaled(self, s):
        gt = None if self.gt is None else (lambda t: s * np.asarray(self.gt(t)))
        return BoundaryData(lambda t: s * np.asarray(self.g(t)), gt, self.support_end, self.fd_step)

    def plus(self, other: "BoundaryData"):
        ends = (self.support_end, other.support_end)
        end = None if None in ends else max(ends)
        return BoundaryData(lambda t: self.value(t) + other.value(t),
                            lambda t: self.rate(t) + other.rate(t), end, self.fd_step)


@dataclass
class State:
    """Solver unknowns at one instant; ``v`` is ``None`` for purely linear runs."""

    t: float
    u: np.ndarray
    ut: np.ndarray
    v: Optional[np.ndarray] = None

    def copy(self):
        return State(self.t, self.u.copy(), self.ut.copy(),
                     None if self.v is None else self.v.copy())


@dataclass
class Trajectory:
    """Uniformly sampled solution history.

    ``u``/``ut`` have shape ``(n_samples, n_nodes)``, ``v`` (if present)
    ``(n_samples, n_nodes, dim)``.  ``diagnostics`` maps column names to
    per-sample arrays; see :func:`compute_diagnostics`.
    """

    domain: Domain
    params: PhysicalParams
    times: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    v: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)
    status: str = "complete"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.u) or len(self.u) != len(self.ut):
            raise InvalidArgumentError("times, u and ut must have equal length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise InvalidArgumentError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else math.nan

    def state(self, i):
        v = None if self.v is None else self.v[i]
        return State(float(self.times[i]), self.u[i], self.ut[i], v)

    @property
    def states(self):
        return [self.state(i) for i in range(len(self))]

    def norm_series(self, which="u", order=0, p=2.0):
        arr = {"u": self.u, "ut": self.ut, "v": self.v}[which]
        if arr is None:
            return np.full(len(self), np.nan)
        nrm = NormOrder(p=p, sobolev_order=order)
        return np.array([discrete_norm(a, self.domain, nrm) for a in arr])


class _Recorder:
    def __init__(self, sample_every):
        self.sample_every = max(int(sample_every), 1)
        self.times, self.u, self.ut, self.v = [], [], [], []
        self.extra = {}

    def add(self, step, state: State, force=False, **extra):
        if step % self.sample_every and not force:
            return
        self.times.append(state.t)
        self.u.append(state.u.copy())
        self.ut.append(state.ut.copy())
        if state.v is not None:
            self.v.append(state.v.copy())
        for key, val in extra.items():
            self.extra.setdefault(key, []).append(val)

    def build(self, domain, params, status="complete", meta=None):
        v = np.array(self.v) if self.v else None
        traj = Trajectory(domain, params, np.array(self.times), np.array(self.u),
                          np.array(self.ut), v, status=status, meta=dict(meta or {}))
        for key, vals in self.extra.items():
            traj.diagnostics[key] = np.asarray(vals)
        return traj


def compute_diagnostics(traj: Trajectory, p=2.0, v_ref=None):
    """Fill the per-sample norm columns and degeneracy extrema in place."""
    d = traj.diagnostics
    for which in ("u", "ut"):
        for order, tag in ((0, "Lp"), (1, "W1p"), (2, "W2p")):
            d[f"{which}_{tag}"] = traj.norm_series(which, order, p)
    if traj.v is not None:
        ref = 0.0 if v_ref is None else v_ref
        nrm = NormOrder(p=p, sobolev_order=1)
        d["v_minus_vref_W1p"] = np.array([discrete_norm(v - ref, traj.domain, nrm) for v in traj.v])
    else:
        d["v_minus_vref_W1p"] = np.full(len(traj), np.nan)
    factor = 1.0 - 2.0 * traj.params.k * traj.u
    d["deg_min"] = factor.min(axis=1)
    d["deg_max"] = factor.max(axis=1)
    d.setdefault("newton_iterations", np.zeros(len(traj), dtype=int))
    return traj


@dataclass
class LinearProblem:
    """Data of ``u_tt - c^2 Lap u - b Lap u_t = f`` with ``u = g`` on the boundary.

    ``f`` maps a time to a nodal array (only interior entries are used);
    ``None`` fields mean zero data.
    """

    params: PhysicalParams
    domain: Domain
    f: Optional[Callable[[float], np.ndarray]] = None
    g: Optional[BoundaryData] = None
    u0: Optional[np.ndarray] = None
    u1: Optional[np.ndarray] = None
    t_end: float = 1.0
    dt: float = 0.01
    scheme: str = "trapezoidal"
    strict: bool = True
    p: float = 2.0
    compat_tol: Optional[float] = None
    sample_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if not self.t_end >= self.dt:
            raise InvalidArgumentError("t_end must be at least dt")
        if self.scheme not in SCHEMES:
            raise InvalidArgumentError(f"scheme must be one of {SCHEMES}")
        n = self.domain.n_nodes
        if self.g is None:
            self.g = BoundaryData.zero(self.domain)
        self.u0 = np.zeros(n) if self.u0 is None else np.asarray(self.u0, dtype=float)
        self.u1 = np.zeros(n) if self.u1 is None else np.asarray(self.u1, dtype=float)
        if self.u0.shape != (n,) or self.u1.shape != (n,):
            raise InvalidArgumentError("initial fields must be nodal arrays")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def forcing(self, t):
        if self.f is None:
            return np.zeros(self.domain.n_nodes)
        return np.asarray(self.f(t), dtype=float)

    def validate(self):
        """Check the trace conditions; raise (strict) or warn (permissive)."""
        from .diagnostics import check_compatibility

        report = check_compatibility(self.g, self.u0, self.u1, self.p, self.domain,
                                     tol=self.compat_tol)
        if not report.ok:
            msg = f"incompatible data: max violation {report.max_violation:.3e}"
            if self.strict:
                raise CompatibilityError(msg, report)
            warnings.warn(msg, stacklevel=2)
        return report

    def initial_state(self):
        u = self.u0.copy()
        ut = self.u1.copy()
        u[self.domain.boundary] = self.g.value(0.0)
        ut[self.domain.boundary] = self.g.rate(0.0)
        return State(0.0, u, ut)

    def scaled(self, s):
        f = None if self.f is None else (lambda t, f=self.f: s * np.asarray(f(t)))
        return _replace(self, f=f, g=self.g.scaled(s), u0=s * self.u0, u1=s * self.u1)


def _replace(problem, **changes):
    from dataclasses import replace

    return replace(problem, **changes)


# ---------------------------------------------------------------- stepping

class DampedWaveStepper:
    """Implicit stepper for ``w_t = c2 Lap u + b Lap w + f``, ``u_t = w``.

    ``c2`` may be zero (the boundary-lifting problem ``w_tt - b Lap w_t = 0``).
    """

    def __init__(self, domain: Domain, c2, b, dt, scheme="trapezoidal"):
        if scheme not in SCHEMES:
            raise InvalidArgumentError(f"scheme must be one of {SCHEMES}")
        self.domain = domain
        self.c2, self.b, self.dt, self.scheme = float(c2), float(b), float(dt), scheme
        op = dirichlet_operator(domain)
        self.A, self.B = op.A, op.B
        if scheme == "trapezoidal":
            self.alpha = 0.5 * dt * (b + 0.5 * c2 * dt)
        else:
            self.alpha = dt * (b + c2 * dt)
        M = sp.identity(self.A.shape[0], format="csc") - self.alpha * self.A.tocsc()
        try:
            self.lu = splu(M.tocsc())
        except RuntimeError as exc:
            raise NumericalFailure(f"factorisation failed: {exc}") from exc

    def step(self, u, w, g_old, gt_old, g_new, gt_new, f_old=None, f_new=None):
        d = self.domain
        ii = d.interior
        dt, c2, b = self.dt, self.c2, self.b
        ui, wi = u[ii], w[ii]
        if self.scheme == "trapezoidal":
            rhs = (wi + dt * c2 * (self.A @ ui) + self.alpha * (self.A @ wi)
                   + 0.5 * dt * (self.B @ (c2 * (g_new + g_old) + b * (gt_new + gt_old))))
            if f_old is not None:
                rhs += 0.5 * dt * (f_old[ii] + f_new[ii])
        else:
            rhs = wi + dt * c2 * (self.A @ ui) + dt * (self.B @ (c2 * g_new + b * gt_new))
            if f_new is not None:
                rhs += dt * f_new[ii]
        wi_new = self.lu.solve(rhs)
        if not np.all(np.isfinite(wi_new)):
            raise NumericalFailure("linear solve produced non-finite values")
        if self.scheme == "trapezoidal":
            ui_new = ui + 0.5 * dt * (wi + wi_new)
        else:
            ui_new = ui + dt * wi_new
        u_new = np.empty_like(u)
        w_new = np.empty_like(w)
        u_new[ii], w_new[ii] = ui_new, wi_new
        u_new[d.boundary], w_new[d.boundary] = g_new, gt_new
        return u_new, w_new


def _stepper_for(problem: LinearProblem):
    st = getattr(problem, "_stepper", None)
    if st is None or st.dt != problem.dt:
        st = DampedWaveStepper(problem.domain, problem.params.c ** 2, problem.params.b,
                               problem.dt, problem.scheme)
        problem._stepper = st
    return st


def step_damped_wave(state: State, problem: LinearProblem, t=None) -> State:
    """Advance ``state`` (at time ``t``) by ``problem.dt``."""
    t = state.t if t is None else t
    dt = problem.dt
    st = _stepper_for(problem)
    g = problem.g
    f_old = f_new = None
    if problem.f is not None:
        f_old, f_new = problem.forcing(t), problem.forcing(t + dt)
    u, w = st.step(state.u, state.ut, g.value(t), g.rate(t), g.value(t + dt), g.rate(t + dt),
                   f_old, f_new)
    return State(t + dt, u, w, state.v)


def solve_linear(problem: LinearProblem, validate=True) -> Trajectory:
    """Integrate ``problem`` to ``t_end`` and return the sampled trajectory."""
    if validate:
        problem.validate()
    state = problem.initial_state()
    rec = _Recorder(problem.sample_every)
    rec.add(0, state)
    n = problem.n_steps
    for step in range(1, n + 1):
        t = (step - 1) * problem.dt
        state = step_damped_wave(state, problem, t)
        state.t = step * problem.dt
        rec.add(step, state, force=(step == n))
    traj = rec.build(problem.domain, problem.params,
                     meta={"scheme": problem.scheme, "dt": problem.dt, "solver": "linear"})
    return compute_diagnostics(traj, p=problem.p)


# ---------------------------------------------------------------- modal oracle

def modal_roots(params: PhysicalParams, lam):
    """Roots of ``mu^2 + b*lam*mu + c^2*lam = 0`` as complex numbers (slow root first)."""
    b, c2 = params.b, params.c ** 2
    disc = complex((b * lam) ** 2 - 4.0 * c2 * lam)
    r = np.sqrt(disc)
    mu1 = (-b * lam + r) / 2.0
    mu2 = (-b * lam - r) / 2.0
    return mu1, mu2


def modal_decay_rate(params: PhysicalParams, lam):
    """``-max Re(mu)``: the decay rate of a single Dirichlet mode."""
    mu1, mu2 = modal_roots(params, lam)
    return -max(mu1.real, mu2.real)


def modal_solution_1d(m, params: PhysicalParams, a, beta, t, length=math.pi, lam=None):
    """Exact amplitude of mode ``m`` and its rate of change at times ``t``.

    Solves ``alpha'' + b*lam*alpha' + c^2*lam*alpha = 0`` with
    ``alpha(0) = a``, ``alpha'(0) = beta``.  ``lam`` defaults to
    ``(m*pi/length)**2``; pass the discrete eigenvalue to get the exact
    semi-discrete solution.
    """
    if m < 1:
        raise InvalidArgumentError("mode index must be >= 1")
    t = np.asarray(t, dtype=float)
    if lam is None:
        lam = (m * math.pi / length) ** 2
    b, c2 = params.b, params.c ** 2
    disc = (b * lam) ** 2 - 4.0 * c2 * lam
    scale = (b * lam) ** 2 + 4.0 * c2 * lam
    if abs(disc) <= 1e-13 * scale:
        mu = -b * lam / 2.0
        e = np.exp(mu * t)
        k1 = beta - mu * a
        amp = (a + k1 * t) * e
        rate = (k1 + mu * (a + k1 * t)) * e
    elif disc > 0:
        r = math.sqrt(disc)
        mu1, mu2 = (-b * lam + r) / 2.0, (-b * lam - r) / 2.0
        c1 = (beta - mu2 * a) / (mu1 - mu2)
        cc2 = a - c1
        e1, e2 = np.exp(mu1 * t), np.exp(mu2 * t)
        amp = c1 * e1 + cc2 * e2
        rate = c1 * mu1 * e1 + cc2 * mu2 * e2
    else:
        sig = -b * lam / 2.0
        nu = math.sqrt(-disc) / 2.0
        e = np.exp(sig * t)
        cs, sn = np.cos(nu * t), np.sin(nu * t)
        q = (beta - sig * a) / nu
        amp = e * (a * cs + q * sn)
        rate = sig * amp + e * (-a * nu * sn + q * nu * cs)
    return amp, rate


# ---------------------------------------------------------------- heat & lifting

def heat_solve(params: PhysicalParams, domain: Domain, boundary=None, f=None, u_init=None,
               dt=0.01, t_end=1.0, scheme="trapezoidal", sample_every=1) -> Trajectory:
    """Solve ``v_t - b Lap v = f`` with Dirichlet data ``boundary(t)``.

    ``boundary`` is a callable returning boundary-node values (or a
    :class:`BoundaryData`, whose ``value`` is used).  The returned trajectory
    stores ``v`` in ``u`` and ``b Lap v + f`` in ``ut``.
    """
    if scheme not in SCHEMES:
        raise InvalidArgumentError(f"scheme must be one of {SCHEMES}")
    if not dt > 0 or not t_end >= dt:
        raise InvalidArgumentError("need dt > 0 and t_end >= dt")
    nb = len(domain.boundary)
    if boundary is None:
        bfun = lambda t: np.zeros(nb)
    elif isinstance(boundary, BoundaryData):
        bfun = boundary.value
    else:
        bfun = boundary
    ffun = (lambda t: np.zeros(domain.n_nodes)) if f is None else f
    op = dirichlet_operator(domain)
    A, B = op.A, op.B
    ii = domain.interior
    b = params.b
    theta = 0.5 if scheme == "trapezoidal" else 1.0
    M = sp.identity(A.shape[0], format="csc") - theta * dt * b * A.tocsc()
    lu = splu(M.tocsc())

    def rate_of(v, t):
        out = np.zeros(domain.n_nodes)
        out[ii] = b * (A @ v[ii] + B @ v[domain.boundary]) + ffun(t)[ii]
        return out

    v = np.zeros(domain.n_nodes) if u_init is None else np.asarray(u_init, dtype=float).copy()
    v[domain.boundary] = bfun(0.0)
    rec = _Recorder(sample_every)
    rec.add(0, State(0.0, v, rate_of(v, 0.0)))
    n = int(round(t_end / dt))
    for step in range(1, n + 1):
        t0, t1 = (step - 1) * dt, step * dt
        b0, b1 = v[domain.boundary], bfun(t1)
        f0, f1 = ffun(t0)[ii], ffun(t1)[ii]
        rhs = (v[ii] + (1 - theta) * dt * b * (A @ v[ii] + B @ b0)
               + theta * dt * b * (B @ b1) + dt * ((1 - theta) * f0 + theta * f1))
        vi = lu.solve(rhs)
        if not np.all(np.isfinite(vi)):
            raise NumericalFailure("heat solve produced non-finite values")
        v = np.empty(domain.n_nodes)
        v[ii], v[domain.boundary] = vi, b1
        rec.add(step, State(t1, v, rate_of(v, t1)), force=(step == n))
    return rec.build(domain, params, meta={"solver": "heat", "scheme": scheme, "dt": dt})


def lift_boundary(g: BoundaryData, params: PhysicalParams, domain: Domain, dt, t_max,
                  tol=1e-6, strict=True, compat_tol=1e-12) -> Trajectory:
    """Boundary lifting ``w(t) = -int_t^inf v ds`` with ``v`` the heat flow of ``g_t``.

    The integral is truncated at ``t_max`` (trapezoidal rule) and completed by
    the geometric tail ``v(t_max) / (b*lambda0_h)``, where ``lambda0_h`` is
    the principal eigenvalue of the discrete operator.  The sup-norm of that
    tail is stored as ``meta["tail_bound"]``; a bound above ``tol`` raises
    :class:`TruncationError` with the trajectory as payload.  Returns a
    trajectory with ``u = w`` and ``ut = v``.
    """
    g0 = np.max(np.abs(g.value(0.0)), initial=0.0)
    gt0 = np.max(np.abs(g.rate(0.0)), initial=0.0)
    if g0 > compat_tol or (strict and gt0 > compat_tol):
        raise InvalidArgumentError(
            f"lifting needs g(0) = 0 and g_t(0) = 0; got |g(0)|={g0:.3e}, |g_t(0)|={gt0:.3e}")
    heat = heat_solve(params, domain, boundary=g.rate, dt=dt, t_end=t_max)
    V = heat.u
    lam_h = numeric_lambda0(dirichlet_operator(domain), domain, tol=1e-12)
    tail = V[-1] / (params.b * lam_h)
    rev = cumulative_trapezoid(V[::-1], heat.times[::-1], axis=0, initial=0.0)[::-1]
    # rev[n] = int_{t_max}^{t_n} V = -int_{t_n}^{t_max} V
    W = rev - tail[None, :]
    tail_bound = float(np.max(np.abs(tail), initial=0.0))
    traj = Trajectory(domain, params, heat.times, W, V,
                      meta={"solver": "lift_boundary", "tail_bound": tail_bound,
                            "lambda0_h": lam_h, "dt": dt})
    if tail_bound > tol:
        raise TruncationError(
            f"tail estimate {tail_bound:.3e} exceeds tol {tol:.1e}; increase t_max",
            payload=traj)
    return traj


def direct_lift(g: BoundaryData, params: PhysicalParams, domain: Domain, dt, t_max,
                scheme="trapezoidal") -> Trajectory:
    """Time-step ``w_tt - b Lap w_t = 0``, ``w = g`` on the boundary, zero initial data."""
    st = DampedWaveStepper(domain, 0.0, params.b, dt, scheme)
    u = np.zeros(domain.n_nodes)
    w = np.zeros(domain.n_nodes)
    u[domain.boundary] = g.value(0.0)
    w[domain.boundary] = g.rate(0.0)
    rec = _Recorder(1)
    rec.add(0, State(0.0, u, w))
    n = int(round(t_max / dt))
    for step in range(1, n + 1):
        t0, t1 = (step - 1) * dt, step * dt
        u, w = st.step(u, w, g.value(t0), g.rate(t0), g.value(t1), g.rate(t1))
        rec.add(step, State(t1, u, w))
    return rec.build(domain, params, meta={"solver": "direct_lift", "dt": dt})
