"""Experiment drivers behind the CLI subcommands.

Each driver takes a :class:`ScenarioConfig` and returns a :class:`Result`
holding a JSON-ready summary and, when a trajectory was produced, the
per-sample table.  Errors propagate as :mod:`kuznetsov.errors` exceptions;
the CLI maps them to exit codes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import SimpleNamespace
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import __version__
from .diagnostics import (check_compatibility, convergence_study, default_window,
                          derivative_decay_report, fit_decay_rate, modal_error_family,
                          affine_error_family, perturbation_study)
from .domain import (Domain, NormOrder, analytic_lambda0, discrete_norm, numeric_lambda0,
                     omega0, validate_exponent)
from .errors import CompatibilityError, InvalidArgumentError
from .linear import (BoundaryData, LinearProblem, State, Trajectory, compute_diagnostics,
                     direct_lift, lift_boundary, modal_decay_rate, modal_roots,
                     modal_solution_1d, solve_linear)
from .nonlinear import (KuznetsovStepper, _finalise, run_kuznetsov,
                        v_infinity, velocity_from_potential)
from .operators import dirichlet_operator, gradient, laplacian
from .scenarios import DataSpec, ScenarioConfig, _build, build_data, mode_shape

TABLE_COLUMNS = ("t", "u_Lp", "u_W1p", "u_W2p", "ut_Lp", "ut_W1p", "ut_W2p",
                 "v_minus_vinf_W1p", "min_degeneracy", "newton_iterations")

RATE_COLUMNS = ("u_Lp", "u_W1p", "u_W2p", "ut_Lp", "ut_W1p", "ut_W2p",
                "v_minus_vinf_W1p", "grad_u_Lp")


@dataclass
class Result:
    summary: dict
    table: Optional[list] = None
    trajectory: Optional[Trajectory] = field(default=None, repr=False)


def _header(cfg: ScenarioConfig, command):
    return {"command": command, "name": cfg.output.name, "version": __version__,
            "config": cfg.to_dict()}


def _omega0(cfg: ScenarioConfig, domain: Domain):
    lam = analytic_lambda0(domain.geometry)
    return lam, omega0(cfg.physical_params(), lam)


# ---------------------------------------------------------------- run

def attach_velocity(traj: Trajectory, v0):
    """Velocity ``v0 - int_0^t grad u / rho0`` (trapezoidal) for a linear trajectory."""
    grads = np.array([gradient(a, traj.domain) for a in traj.u])
    traj.v = np.asarray(v0)[None] - cumulative_trapezoid(
        grads, traj.times, axis=0, initial=0.0) / traj.params.rho0
    return traj


def simulate(cfg: ScenarioConfig, validate=True) -> Trajectory:
    """Solve the configured problem with the configured model."""
    domain = cfg.domain()
    if cfg.model() == "linear":
        prob = cfg.linear_problem(domain)
        traj = solve_linear(prob, validate=validate)
        attach_velocity(traj, cfg.problem(domain).v0)
        _finalise(traj, replace(cfg.nonlinear_config(), disable_nonlinearity=True), prob.g)
        return traj
    return run_kuznetsov(cfg.problem(domain), cfg.nonlinear_config(), validate=validate)


def trajectory_table(traj: Trajectory):
    d = traj.diagnostics
    n = len(traj)
    iters = d.get("newton_iterations", np.zeros(n, dtype=int))
    rows = []
    for i in range(n):
        rows.append({
            "t": float(traj.times[i]),
            "u_Lp": float(d["u_Lp"][i]), "u_W1p": float(d["u_W1p"][i]),
            "u_W2p": float(d["u_W2p"][i]), "ut_Lp": float(d["ut_Lp"][i]),
            "ut_W1p": float(d["ut_W1p"][i]), "ut_W2p": float(d["ut_W2p"][i]),
            "v_minus_vinf_W1p": float(d["v_minus_vref_W1p"][i]),
            "min_degeneracy": float(d["deg_min"][i]),
            "newton_iterations": int(iters[i]),
        })
    return rows


def _series(traj: Trajectory, name, p):
    d = traj.diagnostics
    if name == "v_minus_vinf_W1p":
        return d["v_minus_vref_W1p"]
    if name == "grad_u_Lp":
        nrm = NormOrder(p=p)
        return np.array([discrete_norm(gradient(a, traj.domain), traj.domain, nrm)
                         for a in traj.u])
    return d[name]


def fit_rates(traj: Trajectory, cfg: ScenarioConfig):
    window = cfg.diagnostics.window
    if window is None and len(traj) >= 2:
        window = default_window(traj.times)
    out = {}
    for name in RATE_COLUMNS:
        try:
            fit = fit_decay_rate(traj.times, _series(traj, name, cfg.solver.p), window=window,
                                 envelope=cfg.diagnostics.envelope)
            out[name] = fit.as_dict()
        except InvalidArgumentError as exc:
            out[name] = {"valid": False, "error": str(exc)}
    return out


def trajectory_summary(traj: Trajectory, cfg: ScenarioConfig):
    lam, w0 = _omega0(cfg, traj.domain)
    rates = fit_rates(traj, cfg)
    d = traj.diagnostics
    margin = cfg.diagnostics.rate_margin
    main = rates["u_Lp"]
    norm_cols = [c for c in TABLE_COLUMNS if c.startswith(("u_", "ut_"))]
    return {
        "status": traj.status,
        "truncated": traj.status != "complete",
        "t_final": float(traj.times[-1]),
        "n_samples": len(traj),
        "model": cfg.model(),
        "lambda0": lam,
        "omega0": w0,
        "rate": main.get("rate"),
        "rates": rates,
        "final_norms": {c: float(d[c][-1]) for c in norm_cols},
        "max_norms": {c: float(np.max(d[c])) for c in norm_cols},
        "min_degeneracy": float(np.min(d["deg_min"])),
        "max_newton_iterations": int(np.max(d.get("newton_iterations", [0]))),
        "tail_bounds": {"v_inf": traj.meta.get("v_inf_tail_bound")},
        "flags": {
            "complete": traj.status == "complete",
            "rate_ok": bool(main.get("valid") and main["rate"] >= margin * w0),
            "degeneracy_ok": bool(np.min(d["deg_min"]) > cfg.solver.degeneracy_guard),
        },
    }


def run(cfg: ScenarioConfig) -> Result:
    traj = simulate(cfg)
    summary = _header(cfg, "run")
    summary.update(trajectory_summary(traj, cfg))
    return Result(summary, trajectory_table(traj), traj)


def partial_result(cfg: ScenarioConfig, command, traj: Trajectory, error) -> Result:
    """Artifacts for a run that stopped early (degeneracy, failure, interrupt)."""
    summary = _header(cfg, command)
    summary["error"] = {"type": type(error).__name__, "message": str(error)}
    if traj is not None and len(traj) >= 1:
        if "u_Lp" not in traj.diagnostics:
            compute_diagnostics(traj, p=cfg.solver.p)
        if len(traj) >= 4:
            summary.update(trajectory_summary(traj, cfg))
        summary["status"] = traj.status
        summary["t_final"] = float(traj.times[-1])
        table = trajectory_table(traj)
    else:
        table = None
    summary["truncated"] = True
    return Result(summary, table, traj)


# ---------------------------------------------------------------- decay

def _decay_start(cfg: ScenarioConfig, traj):
    if cfg.diagnostics.t_start is not None:
        return float(cfg.diagnostics.t_start)
    if cfg.data.g.family == "bump":
        return cfg.data.g.support_end + 0.5
    return default_window(traj.times)[0]


def decay(cfg: ScenarioConfig) -> Result:
    res = run(cfg)
    traj = res.trajectory
    t_start = _decay_start(cfg, traj)
    report = derivative_decay_report(traj, j_max=cfg.diagnostics.j_max, t_start=t_start,
                                     p=cfg.solver.p, envelope=cfg.diagnostics.envelope,
                                     v_inf=traj.meta.get("v_inf"), snr=cfg.diagnostics.snr)
    w0 = res.summary["omega0"]
    bound = cfg.diagnostics.rate_margin * w0
    fits = report.fits_u + report.fits_v
    s = res.summary
    s["command"] = "decay"
    s["derivative_decay"] = report.as_dict()
    s["flags"]["orders_ok"] = bool(fits and all(f.valid and f.rate >= bound for f in fits))
    s["flags"]["degraded"] = report.degraded
    return res


# ---------------------------------------------------------------- converge

def _levels(study, default):
    return list(study.get("levels", default))


def converge(cfg: ScenarioConfig) -> Result:
    st = cfg.study
    kind = st.get("kind", "modal_dt")
    params = cfg.physical_params()
    if kind == "modal_dt":
        levels = _levels(st, [0.08, 0.04, 0.02, 0.01])
        err = modal_error_family("dt", params, int(st.get("mode", 1)), float(st.get("t_end", 2.0)),
                                 n_fixed=int(st.get("n", 64)), scheme=cfg.solver.scheme)
    elif kind == "modal_h":
        levels = _levels(st, [16, 32, 64, 128])
        err = modal_error_family("h", params, int(st.get("mode", 1)), float(st.get("t_end", 1.0)),
                                 dt_fixed=float(st.get("dt", 5e-4)), scheme=cfg.solver.scheme)
    elif kind == "affine":
        levels = _levels(st, [8, 16, 32])
        err = affine_error_family(params, float(st.get("t_end", 1.0)), float(st.get("dt", 0.05)))
    elif kind == "eigen":
        levels = _levels(st, [50, 100, 200])
        err = eigen_error_family(cfg)
    else:
        raise InvalidArgumentError(f"unknown convergence study {kind!r}")
    ratio = float(st.get("ratio", 2.0))
    result = convergence_study(err, levels, ratio=ratio)
    target, tol = float(st.get("expected_order", 2.0)), float(st.get("order_tol", 0.2))
    ok = result.saturated or all(abs(o - target) <= tol for o in result.orders)
    summary = _header(cfg, "converge")
    summary.update({"kind": kind, "study": result.as_dict(), "flags": {"order_ok": bool(ok)}})
    return Result(summary)


def eigen_error_family(cfg: ScenarioConfig):
    """``n -> |lambda0_h - lambda0| / lambda0`` for the configured geometry."""
    g = cfg.geometry

    def err(n):
        spec = replace(g, n=int(n), nx=int(n), ny=None)
        from .scenarios import build_domain

        dom = build_domain(spec)
        lam_h = numeric_lambda0(dirichlet_operator(dom), dom)
        lam = analytic_lambda0(dom.geometry)
        return abs(lam_h - lam) / lam

    return err


# ---------------------------------------------------------------- oracles

def oracle(cfg: ScenarioConfig) -> Result:
    kind = cfg.study.get("kind", "modal")
    try:
        fn = _ORACLES[kind]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown oracle {kind!r}; choose from {sorted(_ORACLES)}") from None
    summary = _header(cfg, "oracle")
    summary["kind"] = kind
    summary.update(fn(cfg))
    return Result(summary)


def _rel(x, y):
    return abs(x - y) / abs(y)


def single_mode_run(cfg: ScenarioConfig, m, slow_only=False, t_end=None, amplitude=1.0):
    """Linear run from ``u0 = a sin(m x)``; ``u1 = Re(mu_slow) a`` when ``slow_only``.

    Returns ``(trajectory, expected_rate)``.
    """
    params = cfg.physical_params()
    dom = cfg.domain()
    if dom.kind != "interval":
        raise InvalidArgumentError("modal oracle runs on the interval")
    lam = (m * math.pi / dom.geometry.length) ** 2
    rate = modal_decay_rate(params, lam)
    beta = 0.0
    if slow_only:
        beta = -rate * amplitude
    shape = mode_shape(dom, m)
    if t_end is None and cfg.study.get("t_end") is not None:
        t_end = float(cfg.study["t_end"])
    if t_end is None:
        # sized per mode: running a fast mode much longer only lets round-off
        # in the slow modes take over the fit
        t_end = float(cfg.study.get("decades", 10.0)) / rate
        freq = float(np.max(np.abs(np.imag(modal_roots(params, lam)))))
        if freq > 0:
            # the envelope fit needs several half-periods inside the final 60%
            t_end = max(t_end, 8.0 * math.pi / freq / 0.6)
    dt = cfg.solver.dt
    sample = max(1, int(round(t_end / dt / 2000)))
    prob = LinearProblem(params, dom, u0=amplitude * shape, u1=beta * shape, t_end=t_end, dt=dt,
                         scheme=cfg.solver.scheme, sample_every=sample)
    return solve_linear(prob), rate


def _oracle_modal(cfg: ScenarioConfig):
    modes = list(cfg.study.get("modes", [1]))
    slow_only = bool(cfg.study.get("slow_only", False))
    tol = float(cfg.study.get("rate_tol", 0.05))
    params = cfg.physical_params()
    rows = []
    for m in modes:
        traj, expected = single_mode_run(cfg, int(m), slow_only)
        fit = fit_decay_rate(traj.times, traj.diagnostics["u_Lp"], envelope=True)
        L = traj.domain.geometry.length
        amp, _ = modal_solution_1d(int(m), params, 1.0, -expected if slow_only else 0.0,
                                   traj.times, length=L)
        exact = amp[:, None] * mode_shape(traj.domain, int(m))[None, :]
        lam = (int(m) * math.pi / L) ** 2
        roots = modal_roots(params, lam)
        rows.append({
            "mode": int(m), "lambda": lam, "expected_rate": expected, "rate": fit.rate,
            "fit_valid": fit.valid, "rel_error": _rel(fit.rate, expected),
            "real_roots": bool(abs(np.imag(roots[0])) == 0.0),
            "max_abs_error": float(np.max(np.abs(traj.u - exact))),
            "t_end": float(traj.times[-1]),
        })
    ok = all(r["fit_valid"] and r["rel_error"] <= tol for r in rows)
    return {"modes": rows, "flags": {"rates_ok": bool(ok)}}


def _oracle_lift(cfg: ScenarioConfig):
    params = cfg.physical_params()
    dom = cfg.domain()
    g, _, _, _ = build_data(cfg.data, dom, cfg.seed)
    dt, t_max = cfg.solver.dt, cfg.solver.t_end
    tol = float(cfg.study.get("tail_tol", 1e-6))
    lifted = lift_boundary(g, params, dom, dt, t_max, tol=tol)
    direct = direct_lift(g, params, dom, dt, t_max, scheme=cfg.solver.scheme)
    scale = float(np.max(np.abs(direct.u)))
    rel_sup = float(np.max(np.abs(lifted.u - direct.u))) / scale
    ident = lift_identity_residual(lifted, g, params)
    trace = float(np.max(np.abs(lifted.u[:, dom.boundary]
                                - np.array([g.value(t) for t in lifted.times]))))
    return {
        "rel_sup_difference": rel_sup, "identity_residual": ident, "trace_error": trace,
        "tail_bound": lifted.meta["tail_bound"],
        "flags": {"lift_ok": rel_sup < float(cfg.study.get("sup_tol", 1e-3)),
                  "identity_ok": ident < float(cfg.study.get("identity_tol", 1e-2))},
    }


def lift_identity_residual(lifted: Trajectory, g: BoundaryData, params):
    """``max_t ||w_t - b Lap w||_L2 / max_t ||w_t||_L2`` at interior nodes."""
    dom = lifted.domain
    nrm = NormOrder(p=2.0)
    res, ref = 0.0, 0.0
    for i, t in enumerate(lifted.times):
        lap = laplacian(lifted.u[i], g.value(t), dom)
        r = lifted.ut[i] - params.b * lap
        r[dom.boundary] = 0.0
        res = max(res, discrete_norm(r, dom, nrm))
        ref = max(ref, discrete_norm(lifted.ut[i], dom, nrm))
    return res / ref if ref > 0 else 0.0


def injected_trajectory(dom: Domain, params, times):
    """``u = exp(-t) sin x`` on an interval; no stored velocity, so ``v0 = 0``."""
    x = dom.coords[:, 0]
    u = np.exp(-times)[:, None] * np.sin(x)[None, :]
    return Trajectory(dom, params, times, u, -u)


def _oracle_vinf(cfg: ScenarioConfig):
    dom = cfg.domain()
    params = cfg.physical_params()
    times = np.arange(int(round(cfg.solver.t_end / cfg.solver.dt)) + 1) * cfg.solver.dt
    traj = injected_trajectory(dom, params, times)
    # not a solution of the equation, so no equation-based tail
    v_inf, tail = v_infinity(traj, params, tail="none")
    exact = -np.cos(dom.coords[:, 0]) / params.rho0
    err = float(np.max(np.abs(v_inf[:, 0] - exact)))
    return {"max_error": err, "tail_bound": tail,
            "flags": {"vinf_ok": err < float(cfg.study.get("tol", 1e-3))}}


def _oracle_quadratic(cfg: ScenarioConfig):
    dom = cfg.domain()
    base = cfg.problem(dom)
    nl_cfg = cfg.nonlinear_config()
    devs = []
    for s in (1.0, 0.5):
        prob = base.scaled(s)
        nl = run_kuznetsov(prob, nl_cfg, diagnostics=False)
        lin = solve_linear(prob.as_linear(strict=cfg.solver.strict, p=cfg.solver.p))
        devs.append(max(discrete_norm(a - b, dom, 0) for a, b in zip(nl.u, lin.u)))
    ratio = devs[0] / devs[1] if devs[1] > 0 else math.nan
    return {"deviations": devs, "ratio": ratio,
            "flags": {"ratio_ok": bool(3.5 <= ratio <= 4.5)}}


def _oracle_superposition(cfg: ScenarioConfig):
    dom = cfg.domain()
    lp = cfg.linear_problem(dom)
    other = cfg.with_overrides(seed=cfg.seed + 1).linear_problem(dom)
    both = replace(lp, g=lp.g.plus(other.g), u0=lp.u0 + other.u0, u1=lp.u1 + other.u1)
    a, b, ab = solve_linear(lp), solve_linear(other), solve_linear(both)
    diff = float(np.max(np.abs(ab.u - a.u - b.u)))
    scale = float(np.max(np.abs(ab.u)))
    return {"max_abs_difference": diff, "scale": scale,
            "flags": {"superposition_ok": diff <= 1e-10 * max(scale, 1.0)}}


def jacobian_check(stepper: KuznetsovStepper, old: State, g1, gt1, step=1e-6, seed=0):
    """Relative error between the analytic Jacobian and central differences.

    The comparison is made at a perturbed iterate (not the converged one) so
    that every term of the Jacobian is exercised.
    """
    ii = stepper.domain.interior
    rng = np.random.default_rng(seed)
    t1 = old.t + stepper.dt
    wi = old.ut[ii] + 0.1 * rng.standard_normal(len(ii)) * (1.0 + np.max(np.abs(old.ut)))
    _, new = stepper.residual(old, wi, g1, gt1, t1)
    J = stepper.jacobian(old, new).toarray()
    fd = np.empty_like(J)
    scale = step * max(1.0, float(np.max(np.abs(wi))))
    for j in range(len(ii)):
        e = np.zeros(len(ii))
        e[j] = scale
        rp, _ = stepper.residual(old, wi + e, g1, gt1, t1)
        rm, _ = stepper.residual(old, wi - e, g1, gt1, t1)
        fd[:, j] = (rp - rm) / (2.0 * scale)
    return float(np.linalg.norm(J - fd) / np.linalg.norm(J))


def _oracle_jacobian(cfg: ScenarioConfig):
    dom = cfg.domain()
    prob = cfg.problem(dom)
    stepper = KuznetsovStepper(dom, prob.params, cfg.nonlinear_config(), prob.dt)
    old = prob.initial_state()
    t1 = prob.dt
    err = jacobian_check(stepper, old, prob.g.value(t1), prob.g.rate(t1),
                         step=float(cfg.study.get("step", 1e-6)), seed=cfg.seed)
    return {"relative_error": err,
            "flags": {"jacobian_ok": err < float(cfg.study.get("tol", 1e-6))}}


def _oracle_velocity(cfg: ScenarioConfig):
    traj = simulate(cfg)
    rep = velocity_from_potential(traj)
    diff = float(np.max(np.abs(rep - traj.v)))
    scale = float(np.max(np.abs(traj.v - traj.v[0][None])))
    rel = diff / scale if scale > 0 else 0.0
    return {"max_abs_difference": diff, "relative_difference": rel,
            "flags": {"velocity_ok": rel < float(cfg.study.get("tol", 1e-8))}}


def _oracle_eigen(cfg: ScenarioConfig):
    dom = cfg.domain()
    lam_h = numeric_lambda0(dirichlet_operator(dom), dom)
    lam = analytic_lambda0(dom.geometry)
    rel = _rel(lam_h, lam)
    return {"numeric": lam_h, "analytic": lam, "rel_error": rel,
            "flags": {"eigen_ok": rel < float(cfg.study.get("tol", 1e-2))}}


_ORACLES = {
    "modal": _oracle_modal,
    "lift": _oracle_lift,
    "vinf": _oracle_vinf,
    "quadratic": _oracle_quadratic,
    "superposition": _oracle_superposition,
    "jacobian": _oracle_jacobian,
    "velocity": _oracle_velocity,
    "eigen": _oracle_eigen,
}


# ---------------------------------------------------------------- compat

def compat(cfg: ScenarioConfig) -> Result:
    """Trace-condition check only.  Raises on ``p = 3/2``; reports otherwise."""
    dom = cfg.domain()
    validate_exponent(cfg.solver.p, dom.dim)
    prob = cfg.problem(dom)
    report = check_compatibility(prob.g, prob.u0, prob.u1, cfg.solver.p, dom,
                                 tol=cfg.solver.compat_tol)
    if not report.ok and cfg.solver.strict:
        raise CompatibilityError(
            f"incompatible data: max violation {report.max_violation:.3e}", report)
    summary = _header(cfg, "compat")
    summary.update({"compat": report.as_dict(), "flags": {"compatible": report.ok}})
    return Result(summary)


# ---------------------------------------------------------------- perturb

def perturb(cfg: ScenarioConfig) -> Result:
    dom = cfg.domain()
    base = cfg.problem(dom)
    spec = _build(DataSpec, cfg.study.get("direction", {"u1": {"family": "modes"}}),
                  "study.direction")
    g, u0, u1, v0 = build_data(spec, dom, cfg.seed)
    direction = SimpleNamespace(g=g, u0=u0, u1=u1, v0=v0)
    deltas = [float(d) for d in cfg.study.get("deltas", [1e-2, 1e-3, 1e-4])]
    model = cfg.model()
    nl_cfg = cfg.nonlinear_config()

    def solve(prob):
        if model == "linear":
            return solve_linear(prob.as_linear(strict=cfg.solver.strict, p=cfg.solver.p))
        return run_kuznetsov(prob, nl_cfg, diagnostics=False)

    rows = perturbation_study(solve, base, direction, deltas, p=cfg.solver.p)
    ratios = [r.ratio for r in rows if r.ok]
    spread = (max(ratios) / min(ratios) - 1.0) if ratios and min(ratios) > 0 else math.nan
    tol = float(cfg.study.get("tol", 0.1))
    summary = _header(cfg, "perturb")
    summary.update({"rows": [r.as_dict() for r in rows], "spread": spread,
                    "flags": {"stable": bool(spread <= tol), "all_ran": all(r.ok for r in rows)}})
    return Result(summary)


COMMANDS = {"run": run, "decay": decay, "converge": converge, "oracle": oracle,
            "compat": compat, "perturb": perturb}
