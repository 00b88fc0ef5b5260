"""Scenario configuration, analytic data families and built-in presets.

A scenario is a nested mapping with six sections plus a seed::

    geometry:    {kind, a, length, n, lx, ly, nx, ny, radius}
    params:      {c, b, k, rho0}
    data:        {u0, u1, g, v0}
    solver:      {model, scheme, nonlinear_scheme, dt, t_end, newton_tol,
                  newton_max_iter, degeneracy_guard, strict, p, compat_tol,
                  sample_every, transport_sign}
    diagnostics: {window, envelope, j_max, t_start, snr, rate_margin}
    study:       {kind, ...}           # used by converge / oracle / perturb
    output:      {dir, name}
    seed:        int

Every key has a default, so ``{}`` is a valid scenario (zero data on the
interval ``(0, pi)``).  Unknown keys are rejected.

Field families for ``u0`` and ``u1``:

* ``zero``
* ``modes``: ``amplitude * sum_j coeffs[j] * phi_{modes[j]}`` where ``phi_m``
  is the ``m``-th Dirichlet sine mode (interval) or ``sin(m pi x) sin(pi y)``
  style products on the rectangle (a mode may be ``m`` or ``[mx, my]``);
  on the disk only mode 1, ``J0(j01 r / R)``, is available.
* ``random_modes``: ``modes 1..n_modes`` with coefficients drawn uniformly
  from ``[-1, 1]`` by a generator seeded from ``seed`` and the field name.

Boundary families for ``g`` (``g = amplitude * phi(t) * psi(x)``):

* ``zero``
* ``exp_envelope``: ``phi = exp(-a t) (1 + a t)``, so ``phi'(0) = 0``.
* ``bump``: ``phi`` the smooth bump ``exp(4 - 1/(s(1-s)))``, ``s = t/T``,
  supported in ``[0, T]``.

``psi`` is ``constant`` (1) or ``linear`` (first coordinate).  With
``match: true`` the closed form ``amplitude * phi(0) * psi`` is added to
``u0`` and ``amplitude * phi'(0) * psi`` to ``u1`` on every node, so the
trace conditions hold exactly.

``v0`` is ``zero`` or ``constant`` (``value`` is a vector of length dim).
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
from scipy import special

from .domain import Domain, PhysicalParams
from .errors import InvalidArgumentError
from .linear import BoundaryData, LinearProblem
from .nonlinear import KuznetsovProblem, NonlinearConfig


# ---------------------------------------------------------------- config sections

@dataclass
class GeometrySpec:
    kind: str = "interval"
    a: float = 0.0
    length: float = math.pi
    n: int = 64
    lx: float = 1.0
    ly: float = 1.0
    nx: int = 32
    ny: Optional[int] = None
    radius: float = 1.0


@dataclass
class ParamsSpec:
    c: float = 1.0
    b: float = 1.0
    k: float = 0.0
    rho0: float = 1.0


@dataclass
class FieldSpec:
    family: str = "zero"
    amplitude: float = 1.0
    modes: list = field(default_factory=lambda: [1])
    coeffs: Optional[list] = None
    n_modes: int = 4


@dataclass
class BoundarySpec:
    family: str = "zero"
    amplitude: float = 1.0
    rate: float = 2.0
    support_end: float = 1.0
    profile: str = "constant"
    match: bool = True


@dataclass
class VelocitySpec:
    family: str = "zero"
    value: Optional[list] = None


@dataclass
class DataSpec:
    u0: FieldSpec = field(default_factory=FieldSpec)
    u1: FieldSpec = field(default_factory=FieldSpec)
    g: BoundarySpec = field(default_factory=BoundarySpec)
    v0: VelocitySpec = field(default_factory=VelocitySpec)


@dataclass
class SolverSpec:
    model: str = "auto"
    scheme: str = "trapezoidal"
    nonlinear_scheme: str = "newton"
    dt: float = 0.01
    t_end: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    degeneracy_guard: float = 0.1
    strict: bool = True
    p: float = 2.0
    compat_tol: Optional[float] = None
    sample_every: int = 1
    transport_sign: float = 1.0


@dataclass
class DiagnosticsSpec:
    window: Optional[list] = None
    envelope: bool = True
    j_max: int = 2
    t_start: Optional[float] = None
    snr: float = 100.0
    rate_margin: float = 0.9


@dataclass
class OutputSpec:
    dir: str = "out"
    name: Optional[str] = None


@dataclass
class ScenarioConfig:
    geometry: GeometrySpec = field(default_factory=GeometrySpec)
    params: ParamsSpec = field(default_factory=ParamsSpec)
    data: DataSpec = field(default_factory=DataSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    study: dict = field(default_factory=dict)
    output: OutputSpec = field(default_factory=OutputSpec)
    seed: int = 0

    @classmethod
    def from_mapping(cls, mapping=None) -> "ScenarioConfig":
        return _build(cls, mapping or {}, "config")

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **sections):
        """Deep-merge ``sections`` into a copy of this config."""
        return ScenarioConfig.from_mapping(deep_merge(self.to_dict(), sections))

    # -- builders
    def domain(self) -> Domain:
        return build_domain(self.geometry)

    def physical_params(self) -> PhysicalParams:
        p = self.params
        return PhysicalParams(c=p.c, b=p.b, k=p.k, rho0=p.rho0)

    def model(self):
        m = self.solver.model
        if m == "auto":
            return "kuznetsov" if self.params.k > 0 else "linear"
        if m not in ("linear", "kuznetsov"):
            raise InvalidArgumentError(f"unknown model {m!r}")
        return m

    def nonlinear_config(self) -> NonlinearConfig:
        s = self.solver
        return NonlinearConfig(scheme=s.nonlinear_scheme, newton_tol=s.newton_tol,
                               newton_max_iter=s.newton_max_iter,
                               degeneracy_guard=s.degeneracy_guard,
                               transport_sign=s.transport_sign, strict=s.strict, p=s.p,
                               compat_tol=s.compat_tol, sample_every=s.sample_every)

    def problem(self, domain=None) -> KuznetsovProblem:
        domain = domain or self.domain()
        g, u0, u1, v0 = build_data(self.data, domain, self.seed)
        return KuznetsovProblem(self.physical_params(), domain, g=g, u0=u0, u1=u1, v0=v0,
                                t_end=self.solver.t_end, dt=self.solver.dt)

    def linear_problem(self, domain=None) -> LinearProblem:
        s = self.solver
        kp = self.problem(domain)
        return LinearProblem(kp.params, kp.domain, g=kp.g, u0=kp.u0, u1=kp.u1, t_end=s.t_end,
                             dt=s.dt, scheme=s.scheme, strict=s.strict, p=s.p,
                             compat_tol=s.compat_tol, sample_every=s.sample_every)


def _build(cls, mapping, where):
    if not isinstance(mapping, dict):
        raise InvalidArgumentError(f"{where} must be a mapping, got {type(mapping).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(mapping) - set(known)
    if unknown:
        raise InvalidArgumentError(f"unknown keys in {where}: {sorted(unknown)}")
    kwargs = {}
    for name, value in mapping.items():
        sub = _SECTION_TYPES.get((cls, name))
        if sub is not None:
            kwargs[name] = _build(sub, value or {}, f"{where}.{name}")
        else:
            kwargs[name] = copy.deepcopy(value)
    return cls(**kwargs)


_SECTION_TYPES = {
    (ScenarioConfig, "geometry"): GeometrySpec,
    (ScenarioConfig, "params"): ParamsSpec,
    (ScenarioConfig, "data"): DataSpec,
    (ScenarioConfig, "solver"): SolverSpec,
    (ScenarioConfig, "diagnostics"): DiagnosticsSpec,
    (ScenarioConfig, "output"): OutputSpec,
    (DataSpec, "u0"): FieldSpec,
    (DataSpec, "u1"): FieldSpec,
    (DataSpec, "g"): BoundarySpec,
    (DataSpec, "v0"): VelocitySpec,
}


def deep_merge(base, override):
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path) -> dict:
    """Read a YAML or JSON mapping (JSON is valid YAML, so one parser suffices)."""
    import yaml

    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{path}: top level must be a mapping")
    return data


def dump_config(config: ScenarioConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------- builders

def build_domain(spec: GeometrySpec) -> Domain:
    if spec.kind == "interval":
        return Domain.interval(spec.a, spec.length, int(spec.n))
    if spec.kind == "rectangle":
        return Domain.rectangle(spec.lx, spec.ly, int(spec.nx),
                                None if spec.ny is None else int(spec.ny))
    if spec.kind == "disk":
        return Domain.disk(spec.radius, int(spec.n))
    raise InvalidArgumentError(f"unknown geometry kind {spec.kind!r}")


def mode_shape(domain: Domain, mode):
    """Dirichlet eigenfunction ``mode`` evaluated at the node coordinates."""
    geom = domain.geometry
    if geom.kind == "interval":
        m = int(mode[0] if isinstance(mode, (list, tuple)) else mode)
        x = domain.coords[:, 0]
        return np.sin(m * np.pi * (x - geom.a) / geom.length)
    if geom.kind == "rectangle":
        mx, my = (mode if isinstance(mode, (list, tuple)) else (mode, 1))
        x, y = domain.coords[:, 0], domain.coords[:, 1]
        return np.sin(int(mx) * np.pi * x / geom.lx) * np.sin(int(my) * np.pi * y / geom.ly)
    if int(mode if not isinstance(mode, (list, tuple)) else mode[0]) != 1:
        raise InvalidArgumentError("only the principal mode is available on the disk")
    r = np.hypot(domain.coords[:, 0], domain.coords[:, 1])
    j01 = special.jn_zeros(0, 1)[0]
    out = special.j0(j01 * np.minimum(r, geom.radius) / geom.radius)
    out[domain.is_boundary] = 0.0
    return out


def build_field(spec: FieldSpec, domain: Domain, seed=0, name="u0"):
    n = domain.n_nodes
    if spec.family == "zero":
        return np.zeros(n)
    if spec.family == "modes":
        coeffs = spec.coeffs if spec.coeffs is not None else [1.0] * len(spec.modes)
        if len(coeffs) != len(spec.modes):
            raise InvalidArgumentError(f"data.{name}: coeffs and modes differ in length")
        modes, coeffs = spec.modes, coeffs
    elif spec.family == "random_modes":
        if spec.n_modes < 1:
            raise InvalidArgumentError(f"data.{name}: n_modes must be >= 1")
        rng = np.random.default_rng([int(seed), _stream_id(name)])
        modes = list(range(1, int(spec.n_modes) + 1))
        coeffs = rng.uniform(-1.0, 1.0, size=len(modes))
    else:
        raise InvalidArgumentError(f"data.{name}: unknown family {spec.family!r}")
    out = np.zeros(n)
    for m, c in zip(modes, coeffs):
        out += float(c) * mode_shape(domain, m)
    return spec.amplitude * out


def _stream_id(name):
    return sum(ord(ch) * 31 ** i for i, ch in enumerate(name)) % (2 ** 31)


def bump(t, T=1.0):
    """``exp(4 - 1/(s(1-s)))`` for ``s = t/T`` in ``(0, 1)``, else 0; peak value 1."""
    t = np.asarray(t, dtype=float)
    s = t / T
    inside = (s > 0.0) & (s < 1.0)
    out = np.zeros_like(s)
    si = s[inside]
    out[inside] = np.exp(4.0 - 1.0 / (si * (1.0 - si)))
    return out


def bump_rate(t, T=1.0):
    t = np.asarray(t, dtype=float)
    s = t / T
    inside = (s > 0.0) & (s < 1.0)
    out = np.zeros_like(s)
    si = s[inside]
    q = si * (1.0 - si)
    out[inside] = np.exp(4.0 - 1.0 / q) * (1.0 - 2.0 * si) / (q * q) / T
    return out


def envelope(t, a):
    return np.exp(-a * np.asarray(t, dtype=float)) * (1.0 + a * np.asarray(t, dtype=float))


def envelope_rate(t, a):
    t = np.asarray(t, dtype=float)
    return -a * a * t * np.exp(-a * t)


def _time_profile(spec: BoundarySpec):
    if spec.family == "exp_envelope":
        if not spec.rate > 0:
            raise InvalidArgumentError("data.g.rate must be positive")
        return (lambda t: float(envelope(t, spec.rate)),
                lambda t: float(envelope_rate(t, spec.rate)), None)
    if spec.family == "bump":
        if not spec.support_end > 0:
            raise InvalidArgumentError("data.g.support_end must be positive")
        T = spec.support_end
        return lambda t: float(bump(t, T)), lambda t: float(bump_rate(t, T)), T
    raise InvalidArgumentError(f"data.g: unknown family {spec.family!r}")


def _space_profile(spec: BoundarySpec, domain: Domain):
    if spec.profile == "constant":
        return np.ones(domain.n_nodes)
    if spec.profile == "linear":
        return domain.points[:, 0].copy()
    raise InvalidArgumentError(f"data.g: unknown profile {spec.profile!r}")


def build_boundary(spec: BoundarySpec, domain: Domain):
    """Return ``(BoundaryData, psi, phi, phi_t)``; ``psi`` is nodal, ``phi`` scalar."""
    if spec.family == "zero":
        return BoundaryData.zero(domain), None, None, None
    phi, phi_t, support = _time_profile(spec)
    psi = _space_profile(spec, domain)
    trace = spec.amplitude * psi[domain.boundary]
    g = BoundaryData(lambda t: phi(t) * trace, lambda t: phi_t(t) * trace, support_end=support)
    return g, psi, phi, phi_t


def build_velocity(spec: VelocitySpec, domain: Domain):
    out = np.zeros((domain.n_nodes, domain.dim))
    if spec.family == "zero":
        return out
    if spec.family == "constant":
        val = np.asarray(spec.value if spec.value is not None else [0.0] * domain.dim, float)
        if val.shape != (domain.dim,):
            raise InvalidArgumentError(f"data.v0.value must have length {domain.dim}")
        return out + val[None, :]
    raise InvalidArgumentError(f"data.v0: unknown family {spec.family!r}")


def build_data(spec: DataSpec, domain: Domain, seed=0):
    u0 = build_field(spec.u0, domain, seed, "u0")
    u1 = build_field(spec.u1, domain, seed, "u1")
    g, psi, phi, phi_t = build_boundary(spec.g, domain)
    if psi is not None and spec.g.match:
        u0 = u0 + spec.g.amplitude * phi(0.0) * psi
        u1 = u1 + spec.g.amplitude * phi_t(0.0) * psi
    v0 = build_velocity(spec.v0, domain)
    return g, u0, u1, v0


# ---------------------------------------------------------------- presets

_MODE1 = {"u0": {"family": "modes", "modes": [1]}}


def _rate_bound(b, t_end, dt):
    return {
        "command": "run",
        "description": f"linear, c=1, b={b}: random mixed modes, rate of ||u||_L2 vs omega0",
        "config": {
            "geometry": {"n": 64},
            "params": {"c": 1.0, "b": b},
            "data": {"u0": {"family": "random_modes", "amplitude": 1e-3, "n_modes": 6},
                     "u1": {"family": "random_modes", "amplitude": 1e-3, "n_modes": 6}},
            "solver": {"t_end": t_end, "dt": dt, "sample_every": 5},
            "diagnostics": {"rate_margin": 0.95},
            # per-mode check starts on the slow root; at c = b = 1 mode 2 is
            # critically damped and (1 + 2t) e^{-2t} would bias the fit
            "study": {"kind": "modal", "modes": [1, 2, 3], "slow_only": True},
        },
    }


def _nonlinear_small(amplitude):
    return {
        "command": "decay",
        "description": f"k=1 Kuznetsov, mode-1 data of amplitude {amplitude:g}",
        "config": {
            "params": {"k": 1.0},
            "geometry": {"n": 64},
            "data": {"u0": {"family": "modes", "modes": [1], "amplitude": amplitude}},
            "solver": {"t_end": 30.0, "dt": 0.02},
            "diagnostics": {"j_max": 1, "t_start": 6.0},
        },
    }


PRESETS = {
    "empty": {
        "command": "run",
        "description": "all defaults: zero data on (0, pi)",
        "config": {},
    },
    "thm11-linear-mode1": {
        "command": "run",
        "description": "linear, c=b=1, u0 = sin x on (0, pi): rate 0.5",
        "config": {"geometry": {"n": 100}, "data": _MODE1,
                   "solver": {"t_end": 40.0, "dt": 0.01, "sample_every": 2}},
    },
    "modal-convergence-dt": {
        "command": "converge",
        "description": "linear mode 1 vs modal oracle under dt refinement",
        "config": {"study": {"kind": "modal_dt", "levels": [0.08, 0.04, 0.02, 0.01],
                             "n": 64, "t_end": 2.0}},
    },
    "modal-convergence-h": {
        "command": "converge",
        "description": "linear mode 1 vs modal oracle under h refinement",
        "config": {"study": {"kind": "modal_h", "levels": [16, 32, 64, 128],
                             "dt": 5e-4, "t_end": 1.0}},
    },
    "modal-oracle": {
        "command": "oracle",
        "description": "linear mode 1 vs closed-form modal solution",
        "config": {"geometry": {"n": 100}, "solver": {"t_end": 4.0, "dt": 0.005},
                   "study": {"kind": "modal", "modes": [1]}},
    },
    "rate-bound-b1": _rate_bound(1.0, 40.0, 0.02),
    "rate-bound-b4": _rate_bound(4.0, 60.0, 0.02),
    "rate-bound-b0.1": _rate_bound(0.1, 240.0, 0.05),
    "branch-structure": {
        "command": "oracle",
        "description": "per-mode rates for modes 1..10 vs the quadratic roots (c=b=1)",
        "config": {"geometry": {"n": 100}, "solver": {"dt": 0.01},
                   "study": {"kind": "modal", "modes": list(range(1, 11)), "slow_only": True}},
    },
    "boundary-lift": {
        "command": "oracle",
        "description": "boundary lift by heat solve + tail integral vs direct stepping",
        "config": {"geometry": {"n": 64},
                   "data": {"g": {"family": "bump", "amplitude": 1.0, "support_end": 1.0}},
                   "solver": {"dt": 0.005, "t_end": 16.0},
                   "study": {"kind": "lift"}},
    },
    "nonlinear-small-data": _nonlinear_small(1e-3),
    "nonlinear-small-data-1e-2": _nonlinear_small(1e-2),
    "nonlinear-small-data-1e-1": _nonlinear_small(1e-1),
    "quadratic-scaling": {
        "command": "oracle",
        "description": "||nonlinear - linear|| ratio when all data are halved",
        "config": {"params": {"k": 1.0},
                   "data": {"u0": {"family": "modes", "modes": [1], "amplitude": 1e-2}},
                   "solver": {"t_end": 2.0, "dt": 0.01},
                   "study": {"kind": "quadratic"}},
    },
    "vinf-analytic": {
        "command": "oracle",
        "description": "v_inf from the injected trajectory u = exp(-t) sin x",
        "config": {"geometry": {"n": 200}, "solver": {"t_end": 25.0, "dt": 0.01},
                   "study": {"kind": "vinf"}},
    },
    "derivative-decay-bump": {
        "command": "decay",
        "description": "k=1, boundary bump on [0, 1]; time derivatives up to order 2",
        "config": {"params": {"k": 1.0}, "geometry": {"n": 100},
                   "data": {"g": {"family": "bump", "amplitude": 1e-2, "support_end": 1.0}},
                   "solver": {"t_end": 30.0, "dt": 0.01},
                   "diagnostics": {"j_max": 2, "t_start": 1.5}},
    },
    "compat-mismatch": {
        "command": "compat",
        "description": "g(0) = 1 on the boundary but u0 = 0",
        "config": {"data": {"g": {"family": "exp_envelope", "amplitude": 1.0, "match": False}}},
    },
    "compat-p1.4": {
        "command": "compat",
        "description": "p = 1.4: only the order-0 trace condition is checked",
        "config": {"solver": {"p": 1.4},
                   "data": {"g": {"family": "exp_envelope", "amplitude": 1.0}}},
    },
    "compat-p1.5": {
        "command": "compat",
        "description": "p = 3/2 is rejected",
        "config": {"solver": {"p": 1.5}},
    },
    "degeneracy-above": {
        "command": "run",
        "description": "k=1, u0 = 0.525 sin x: 1 - 2ku < 0 at t = 0",
        "config": {"params": {"k": 1.0},
                   "data": {"u0": {"family": "modes", "modes": [1], "amplitude": 0.525}},
                   "solver": {"t_end": 1.5}},
    },
    "degeneracy-below": {
        "command": "run",
        "description": "k=1, u0 = 0.475 sin x with guard 0.02: runs past t = 1",
        "config": {"params": {"k": 1.0},
                   "data": {"u0": {"family": "modes", "modes": [1], "amplitude": 0.475}},
                   "solver": {"t_end": 1.5, "degeneracy_guard": 0.02}},
    },
    "eigen-crosscheck-interval": {
        "command": "converge",
        "description": "numeric vs analytic principal eigenvalue on (0, pi)",
        "config": {"geometry": {"kind": "interval"},
                   "study": {"kind": "eigen", "levels": [50, 100, 200]}},
    },
    "eigen-crosscheck-square": {
        "command": "converge",
        "description": "numeric vs analytic principal eigenvalue on the unit square",
        "config": {"geometry": {"kind": "rectangle"},
                   "study": {"kind": "eigen", "levels": [20, 40, 80]}},
    },
    "eigen-disk": {
        "command": "oracle",
        "description": "numeric principal eigenvalue on the embedded disk",
        "config": {"geometry": {"kind": "disk", "n": 60}, "study": {"kind": "eigen"}},
    },
    "superposition": {
        "command": "oracle",
        "description": "linear solver: S(a + b) = S(a) + S(b)",
        "config": {"data": {"u0": {"family": "random_modes", "amplitude": 1.0},
                            "u1": {"family": "random_modes", "amplitude": 1.0},
                            "g": {"family": "exp_envelope", "amplitude": 0.5}},
                   "study": {"kind": "superposition"}},
    },
    "jacobian-check": {
        "command": "oracle",
        "description": "Newton Jacobian vs finite differences at step 1e-6",
        "config": {"params": {"k": 1.0},
                   "data": {"u0": {"family": "random_modes", "amplitude": 0.1},
                            "u1": {"family": "random_modes", "amplitude": 0.1},
                            "v0": {"family": "constant", "value": [0.2]}},
                   "study": {"kind": "jacobian", "step": 1e-6}},
    },
    "velocity-representation": {
        "command": "oracle",
        "description": "stored v vs -grad(int u + U0)/rho0",
        "config": {"params": {"k": 1.0},
                   "data": {"u0": {"family": "modes", "modes": [1], "amplitude": 1e-2}},
                   "solver": {"t_end": 3.0},
                   "study": {"kind": "velocity"}},
    },
    "perturb-linear": {
        "command": "perturb",
        "description": "difference quotients in direction u1 = sin x, k = 0",
        "config": {"data": _MODE1, "solver": {"t_end": 2.0},
                   "study": {"kind": "perturb", "deltas": [1e-2, 1e-3, 1e-4],
                             "direction": {"u1": {"family": "modes", "modes": [1]}}}},
    },
    "perturb-nonlinear": {
        "command": "perturb",
        "description": "difference quotients in direction u1 = sin x, k = 1",
        "config": {"params": {"k": 1.0},
                   "data": {"u0": {"family": "modes", "modes": [1], "amplitude": 0.05}},
                   "solver": {"t_end": 2.0},
                   "study": {"kind": "perturb", "deltas": [1e-2, 1e-3, 1e-4],
                             "direction": {"u1": {"family": "modes", "modes": [1]}}}},
    },
}


def preset(name) -> tuple:
    """``(command, ScenarioConfig)`` for a named preset."""
    try:
        entry = PRESETS[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
    cfg = deep_merge(entry["config"], {"output": {"name": name}})
    return entry["command"], ScenarioConfig.from_mapping(cfg)
