"""Decay-rate fitting, trace compatibility checks and verification studies."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .domain import Domain, NormOrder, discrete_norm, validate_exponent
from .errors import InvalidArgumentError, StudyInvalidError

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


# ---------------------------------------------------------------- rate fitting

@dataclass
class RateFit:
    rate: float
    intercept: float
    window: tuple
    residual: float
    valid: bool
    n_points: int = 0
    clipped: int = 0
    envelope: bool = False

    def as_dict(self):
        return {"rate": self.rate, "intercept": self.intercept, "window": list(self.window),
                "residual": self.residual, "valid": self.valid, "n_points": self.n_points,
                "clipped": self.clipped, "envelope": self.envelope}


def default_window(times, fraction=0.6):
    """Final ``fraction`` of the time span."""
    t0, t1 = float(times[0]), float(times[-1])
    return (t1 - fraction * (t1 - t0), t1)


def _local_maxima(y):
    if len(y) < 3:
        return np.array([], dtype=int)
    inner = (y[1:-1] >= y[:-2]) & (y[1:-1] > y[2:])
    return np.flatnonzero(inner) + 1


def fit_decay_rate(times, values, window=None, envelope=False, residual_cap=0.5,
                   floor=None) -> RateFit:
    """Least-squares line through ``(t, log y)``; the rate is minus the slope.

    ``window`` defaults to the final 60% of the series.  With ``envelope`` the
    fit uses only the local maxima inside the window (when there are at least
    four), which removes the bias from oscillating prefactors whose zeros
    would otherwise dominate ``log y``.  Values at or below ``floor``
    (default: the smallest positive normal float times the series maximum)
    are clipped and make the fit invalid.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape:
        raise InvalidArgumentError("times and values must have the same shape")
    if window is None:
        window = default_window(t)
    t_start, t_end = float(window[0]), float(window[1])
    if not t_start < t_end:
        raise InvalidArgumentError(f"empty window {window}")
    tol = 1e-9 * max(1.0, abs(t_end))
    sel = (t >= t_start - tol) & (t <= t_end + tol)
    if sel.sum() < 4:
        raise InvalidArgumentError(f"need at least 4 samples in window {window}, got {sel.sum()}")
    tw, yw = t[sel], y[sel]
    if floor is None:
        floor = np.finfo(float).tiny * max(1.0, float(np.nanmax(np.abs(yw))) if len(yw) else 1.0)
    bad = ~(yw > floor) | ~np.isfinite(yw)
    clipped = int(bad.sum())
    yw = np.where(bad, floor, yw)
    used_envelope = False
    if envelope and clipped == 0:
        peaks = _local_maxima(yw)
        if len(peaks) >= 4:
            tw, yw = tw[peaks], yw[peaks]
            used_envelope = True
    logy = np.log(yw)
    slope, intercept = np.polyfit(tw, logy, 1)
    resid = logy - (slope * tw + intercept)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    valid = clipped == 0 and rms <= residual_cap
    return RateFit(float(-slope), float(intercept), (t_start, t_end), rms, bool(valid),
                   int(len(tw)), clipped, used_envelope)


# ---------------------------------------------------------------- compatibility

@dataclass
class CompatReport:
    order0_ok: bool
    order1_ok: Optional[bool]
    p: float
    max_violation: float
    tol: float = 0.0
    violation0: float = 0.0
    violation1: Optional[float] = None

    @property
    def ok(self):
        return self.order0_ok and self.order1_ok is not False

    def as_dict(self):
        return {"order0_ok": self.order0_ok, "order1_ok": self.order1_ok, "p": self.p,
                "max_violation": self.max_violation, "tol": self.tol,
                "violation0": self.violation0, "violation1": self.violation1, "ok": self.ok}


def check_compatibility(g, u0, u1, p, domain: Domain, tol=None) -> CompatReport:
    """Compare ``g(0)`` with ``u0`` and (for p > 3/2) ``g_t(0)`` with ``u1`` on the boundary.

    ``tol`` defaults to ``10 h^2`` with ``h`` the largest grid spacing.
    """
    validate_exponent(p, domain.dim)
    if tol is None:
        tol = 10.0 * domain.hmax ** 2
    bnd = domain.boundary
    g0 = np.asarray(g.value(0.0), dtype=float)
    v0 = float(np.max(np.abs(g0 - np.asarray(u0, dtype=float)[bnd]), initial=0.0))
    v1 = None
    ok1 = None
    if p > 1.5:
        gt0 = np.asarray(g.rate(0.0), dtype=float)
        v1 = float(np.max(np.abs(gt0 - np.asarray(u1, dtype=float)[bnd]), initial=0.0))
        ok1 = v1 <= tol
    worst = max(v0, v1 if v1 is not None else 0.0)
    return CompatReport(v0 <= tol, ok1, float(p), worst, float(tol), v0, v1)


# ---------------------------------------------------------------- derivative decay

@dataclass
class DecayReport:
    fits_u: list
    fits_v: list
    orders: list
    degraded: bool
    last_reliable_order: int
    window: tuple
    noise_floors: list = field(default_factory=list)

    def as_dict(self):
        return {
            "orders": self.orders,
            "u": [f.as_dict() for f in self.fits_u],
            "v": [f.as_dict() for f in self.fits_v],
            "degraded": self.degraded,
            "last_reliable_order": self.last_reliable_order,
            "window": list(self.window),
        }


def time_derivative(samples, dt, order):
    """Repeated central differences along axis 0.

    Even orders apply ``(x[n+1] - 2x[n] + x[n-1]) / dt^2`` ``order//2`` times,
    odd orders add one ``(x[n+1] - x[n-1]) / (2 dt)``.  Returns the values and
    the number of samples trimmed at each end.
    """
    x = np.asarray(samples, dtype=float)
    trim = 0
    for _ in range(order // 2):
        x = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / dt ** 2
        trim += 1
    if order % 2:
        x = (x[2:] - x[:-2]) / (2.0 * dt)
        trim += 1
    return x, trim


def _noise_gain(order, dt):
    return (4.0 / dt ** 2) ** (order // 2) * (1.0 / dt) ** (order % 2)


def _fit_value(fit, t):
    return float(np.exp(fit.intercept - fit.rate * t))


def derivative_decay_report(trajectory, j_max=2, t_start=None, t_end=None, p=2.0,
                            envelope=True, v_inf=None, snr=1e2) -> DecayReport:
    """Fit decay rates of ``d^j u/dt^j`` (W^2_p surrogate) and ``d^j v/dt^j`` (W^1_p).

    Order 0 of ``v`` is ``v - v_inf``.  An order counts as degraded when the
    fitted envelope at the end of the window falls below ``snr`` times the
    round-off floor of the difference quotient (``eps * max|u| * gain_j``), or
    when its fit is invalid; the report then lists the last reliable order.
    The envelope is used rather than the raw minimum because oscillating
    modes pass close to zero without being noise dominated.
    """
    traj = trajectory
    times = traj.times
    if len(times) < 3:
        raise InvalidArgumentError("trajectory too short")
    dt = traj.dt
    if t_start is None:
        t_start = default_window(times)[0]
    if not t_start > 0:
        raise InvalidArgumentError("t_start must be positive")
    t_end = float(times[-1]) if t_end is None else t_end
    n_u = NormOrder(p=p, sobolev_order=2)
    n_v = NormOrder(p=p, sobolev_order=1)
    if traj.v is not None and v_inf is None:
        from .nonlinear import v_infinity
        from .errors import NoLimitError

        try:
            v_inf, _ = v_infinity(traj, traj.params)
        except NoLimitError:
            v_inf = traj.v[-1]
    fits_u, fits_v, floors = [], [], []
    degraded = False
    last_ok = -1
    scale_u = max(discrete_norm(a, traj.domain, n_u) for a in traj.u)
    for j in range(j_max + 1):
        du, trim = time_derivative(traj.u, dt, j)
        tj = times[trim: len(times) - trim]
        sel = (tj >= t_start - 1e-12) & (tj <= t_end + 1e-12)
        series = np.array([discrete_norm(a, traj.domain, n_u) for a in du[sel]])
        fit = fit_decay_rate(tj[sel], series, window=(t_start, t_end), envelope=envelope)
        fits_u.append(fit)
        floor = 10.0 * EPS * scale_u * _noise_gain(j, dt)
        floors.append(floor)
        ok = fit.valid and _fit_value(fit, t_end) >= snr * floor
        if traj.v is not None:
            base = traj.v - v_inf if j == 0 else traj.v
            dv, trim_v = time_derivative(base, dt, j)
            series_v = np.array([discrete_norm(a, traj.domain, n_v) for a in dv[sel]])
            fv = fit_decay_rate(tj[sel], series_v, window=(t_start, t_end), envelope=envelope)
            fits_v.append(fv)
            ok = ok and fv.valid
        if ok and not degraded:
            last_ok = j
        else:
            degraded = True
    if degraded:
        warnings.warn(f"derivative orders above {last_ok} are not reliable at dt={dt:g}",
                      stacklevel=2)
    return DecayReport(fits_u, fits_v, list(range(j_max + 1)), degraded, last_ok,
                       (t_start, t_end), floors)


# ---------------------------------------------------------------- convergence

@dataclass
class ConvergenceResult:
    levels: list
    errors: list
    orders: list
    saturated: bool

    def as_dict(self):
        return {"levels": self.levels, "errors": self.errors, "orders": self.orders,
                "saturated": self.saturated}


def convergence_study(error_at: Callable[[object], float], levels: Sequence, ratio=2.0,
                      floor=1e-12) -> ConvergenceResult:
    """Errors at successive refinement levels and observed orders ``log(e_k/e_{k+1})/log(ratio)``.

    If every error is below ``floor`` the study is reported as saturated
    (exactly representable solution).  Otherwise errors must decrease
    strictly, else :class:`StudyInvalidError` carries the raw table.
    """
    levels = list(levels)
    errors = [float(error_at(lv)) for lv in levels]
    if all(e <= floor for e in errors):
        return ConvergenceResult(levels, errors, [math.nan] * (len(errors) - 1), True)
    if any(not (b < a) for a, b in zip(errors, errors[1:])):
        raise StudyInvalidError("errors do not decrease monotonically",
                                {"levels": levels, "errors": errors})
    orders = [math.log(a / b) / math.log(ratio) for a, b in zip(errors, errors[1:])]
    return ConvergenceResult(levels, errors, orders, False)


def modal_error_family(refine="dt", params=None, mode=1, t_end=2.0, n_fixed=None,
                       dt_fixed=None, scheme="trapezoidal"):
    """Return ``level -> max error`` for single-mode 1D data on ``(0, pi)``.

    ``refine="dt"``: level is the time step; the grid is fixed and the oracle
    uses the discrete eigenvalue so only the time error is measured.
    ``refine="h"``: level is the number of cells; the time step is fixed
    (small) and the oracle is the continuum mode.
    """
    from .domain import PhysicalParams
    from .linear import LinearProblem, modal_solution_1d, solve_linear

    params = params or PhysicalParams(c=1.0, b=1.0)

    def run(n, dt):
        dom = Domain.interval(0.0, math.pi, n)
        u0 = dom.sample(lambda x: np.sin(mode * x))
        prob = LinearProblem(params, dom, u0=u0, t_end=t_end, dt=dt, scheme=scheme)
        traj = solve_linear(prob)
        if refine == "dt":
            h = dom.hmax
            lam = (2.0 / h ** 2) * (1.0 - math.cos(mode * h))
        else:
            lam = None
        amp, _ = modal_solution_1d(mode, params, 1.0, 0.0, traj.times, lam=lam)
        exact = amp[:, None] * np.sin(mode * dom.coords[:, 0])[None, :]
        return float(np.max(np.abs(traj.u - exact)))

    if refine == "dt":
        n = n_fixed or 64
        return lambda dt: run(n, dt)
    if refine == "h":
        dt = dt_fixed or 1e-3
        return lambda n: run(int(n), dt)
    raise InvalidArgumentError("refine must be 'dt' or 'h'")


def affine_error_family(params=None, t_end=1.0, dt=0.05):
    """Steady affine solution ``u = x``: the scheme reproduces it to round-off."""
    from .domain import PhysicalParams
    from .linear import BoundaryData, LinearProblem, solve_linear

    params = params or PhysicalParams()

    def err(n):
        dom = Domain.interval(0.0, math.pi, int(n))
        g = BoundaryData.from_function(dom, lambda t, x: x, lambda t, x: 0.0 * x)
        u0 = dom.coords[:, 0].copy()
        traj = solve_linear(LinearProblem(params, dom, g=g, u0=u0, t_end=t_end, dt=dt))
        return float(np.max(np.abs(traj.u - u0[None, :])))

    return err


# ---------------------------------------------------------------- perturbation

@dataclass
class PerturbationRow:
    delta: float
    ratio: float
    ok: bool
    error: str = ""

    def as_dict(self):
        return {"delta": self.delta, "ratio": self.ratio, "ok": self.ok, "error": self.error}


def solution_distance(a, b, p=2.0):
    """``max_t ||u_a(t) - u_b(t)||_{L_p}`` over common samples."""
    n = min(len(a), len(b))
    nrm = NormOrder(p=p)
    return max(discrete_norm(a.u[i] - b.u[i], a.domain, nrm) for i in range(n))


def perturbation_study(run: Callable, base_data, direction, deltas, p=2.0):
    """Difference quotients ``||S(base + delta*dir) - S(base)|| / delta``.

    ``run`` maps a data object to a trajectory; data objects provide
    ``perturbed(delta, direction)``.  Failed perturbed runs are recorded
    and the study continues.
    """
    base = run(base_data)
    rows = []
    for delta in deltas:
        try:
            traj = run(base_data.perturbed(delta, direction))
            rows.append(PerturbationRow(float(delta), solution_distance(traj, base, p) / delta, True))
        except Exception as exc:  # noqa: BLE001 - every failure is tabulated
            log.warning("perturbed run delta=%g failed: %s", delta, exc)
            rows.append(PerturbationRow(float(delta), math.nan, False, f"{type(exc).__name__}: {exc}"))
    return rows
