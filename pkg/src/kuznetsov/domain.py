"""Geometry, physical constants, principal Dirichlet eigenvalues and discrete norms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.sparse.linalg import splu

from . import kernels
from .errors import InvalidArgumentError, NumericalFailure, UnsupportedExponentError


@dataclass(frozen=True)
class PhysicalParams:
    """Constants of the Kuznetsov equation.

    ``k = 0`` switches the pressure self-interaction off (linear limit).
    """

    c: float = 1.0
    b: float = 1.0
    k: float = 0.0
    rho0: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and self.b > 0 and self.rho0 > 0 and self.k >= 0):
            raise InvalidArgumentError(
                f"need c > 0, b > 0, rho0 > 0, k >= 0; got {self}")

    def omega0(self, lambda0):
        return omega0(self, lambda0)


def omega0(params: PhysicalParams, lambda0: float) -> float:
    """Threshold decay rate ``min(b*lambda0/2, c**2/b)``."""
    if not lambda0 > 0:
        raise InvalidArgumentError(f"lambda0 must be positive, got {lambda0}")
    return min(params.b * lambda0 / 2.0, params.c ** 2 / params.b)


@dataclass(frozen=True)
class Interval:
    a: float = 0.0
    length: float = math.pi
    kind: str = field(default="interval", init=False)


@dataclass(frozen=True)
class Rectangle:
    lx: float = 1.0
    ly: float = 1.0
    kind: str = field(default="rectangle", init=False)


@dataclass(frozen=True)
class Disk:
    radius: float = 1.0
    kind: str = field(default="disk", init=False)


def analytic_lambda0(geometry) -> float:
    """Exact principal eigenvalue of -Laplace with zero Dirichlet data."""
    if isinstance(geometry, Domain):
        geometry = geometry.geometry
    if isinstance(geometry, Interval):
        return (math.pi / geometry.length) ** 2
    if isinstance(geometry, Rectangle):
        return math.pi ** 2 * (1.0 / geometry.lx ** 2 + 1.0 / geometry.ly ** 2)
    if isinstance(geometry, Disk):
        j01 = float(special.jn_zeros(0, 1)[0])
        return (j01 / geometry.radius) ** 2
    raise InvalidArgumentError(f"unsupported geometry {geometry!r}")


class Domain:
    """Node set of a Cartesian grid restricted to the geometry.

    Nodes are numbered in C order of their grid indices.  Every node is either
    interior (an unknown of the Dirichlet problem) or boundary (carries the
    Dirichlet value).  For the disk, boundary nodes are the grid points on or
    outside the circle that are axis-neighbours of interior points; boundary
    data for them is evaluated at their radial projection onto the circle,
    which is what ``points`` returns.

    Use the ``interval``/``rectangle``/``disk`` constructors.
    """

    def __init__(self, geometry, h, grid_index, coords, is_boundary, points,
                 cell_volume):
        self.geometry = geometry
        self.h = np.asarray(h, dtype=float)
        self.grid_index = grid_index
        self.coords = coords
        self.points = points
        self.is_boundary = is_boundary
        self.interior = np.flatnonzero(~is_boundary)
        self.boundary = np.flatnonzero(is_boundary)
        self.cell_volume = cell_volume
        self.nbr = _neighbour_table(grid_index)
        self._check()

    # ------------------------------------------------------------ builders
    @classmethod
    def interval(cls, a=0.0, length=math.pi, n=100):
        """``n`` cells on ``[a, a + length]``."""
        if n < 4:
            raise InvalidArgumentError("need at least 3 interior nodes (n >= 4)")
        h = length / n
        idx = np.arange(n + 1)[:, None]
        x = a + h * idx.astype(float)
        bnd = (idx[:, 0] == 0) | (idx[:, 0] == n)
        vol = np.full(n + 1, h)
        vol[[0, -1]] = h / 2
        return cls(Interval(a, length), (h,), idx, x, bnd, x.copy(), vol)

    @classmethod
    def rectangle(cls, lx=1.0, ly=1.0, nx=50, ny=None):
        ny = nx if ny is None else ny
        if nx < 4 or ny < 4:
            raise InvalidArgumentError("need at least 3 interior nodes per axis")
        hx, hy = lx / nx, ly / ny
        ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
        idx = np.stack([ii.ravel(), jj.ravel()], axis=1)
        xy = idx * np.array([hx, hy])
        bnd = (idx[:, 0] == 0) | (idx[:, 0] == nx) | (idx[:, 1] == 0) | (idx[:, 1] == ny)
        wx = np.where((idx[:, 0] == 0) | (idx[:, 0] == nx), 0.5, 1.0)
        wy = np.where((idx[:, 1] == 0) | (idx[:, 1] == ny), 0.5, 1.0)
        vol = wx * wy * hx * hy
        return cls(Rectangle(lx, ly), (hx, hy), idx, xy, bnd, xy.copy(), vol)

    @classmethod
    def disk(cls, radius=1.0, n=40):
        """Embedded-boundary grid with spacing ``2*radius/n``."""
        if n < 4:
            raise InvalidArgumentError("need at least 3 interior nodes per axis")
        h = 2.0 * radius / n
        ax = np.arange(-1, n + 2)
        ii, jj = np.meshgrid(ax, ax, indexing="ij")
        gi = np.stack([ii.ravel(), jj.ravel()], axis=1)
        xy = -radius + h * gi.astype(float)
        r = np.hypot(xy[:, 0], xy[:, 1])
        inside = r < radius * (1.0 - 1e-12)
        # outside points touching an inside point along an axis
        shape = (len(ax), len(ax))
        ins = inside.reshape(shape)
        touch = np.zeros(shape, dtype=bool)
        touch[1:, :] |= ins[:-1, :]
        touch[:-1, :] |= ins[1:, :]
        touch[:, 1:] |= ins[:, :-1]
        touch[:, :-1] |= ins[:, 1:]
        bnd_full = touch & ~ins
        keep = (ins | bnd_full).ravel()
        gi, xy, r = gi[keep], xy[keep], r[keep]
        bnd = bnd_full.ravel()[keep]
        pts = xy.copy()
        pts[bnd] = xy[bnd] * (radius / r[bnd])[:, None]
        frac = kernels.disk_cell_fraction(np.ascontiguousarray(xy), h, radius, 8)
        # cells wholly outside the circle keep a token weight so the norm stays definite
        frac = np.maximum(frac, 1.0 / 128.0)
        return cls(Disk(radius), (h, h), gi - gi.min(axis=0), xy, bnd, pts, frac * h * h)

    # ------------------------------------------------------------ misc
    @property
    def dim(self):
        return self.coords.shape[1]

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def hmax(self):
        return float(self.h.max())

    @property
    def kind(self):
        return self.geometry.kind

    def boundary_points(self):
        return self.points[self.boundary]

    def interior_points(self):
        return self.points[self.interior]

    def sample(self, func):
        """Evaluate ``func(*coordinate_arrays)`` at every node (boundary nodes at their trace point)."""
        vals = func(*(self.points[:, d] for d in range(self.dim)))
        return np.broadcast_to(np.asarray(vals, dtype=float), (self.n_nodes,)).copy()

    def _check(self):
        if np.any(self.h <= 0):
            raise InvalidArgumentError("grid spacing must be positive")
        if len(self.interior) < 3:
            raise InvalidArgumentError("need at least 3 interior nodes")

    def __repr__(self):
        return (f"Domain({self.geometry!r}, h={tuple(self.h)}, "
                f"interior={len(self.interior)}, boundary={len(self.boundary)})")


def _neighbour_table(grid_index):
    grid_index = np.asarray(grid_index)
    n, dim = grid_index.shape
    ext = grid_index.max(axis=0) + 1
    lookup = -np.ones(tuple(ext + 4), dtype=np.int64)
    lookup[tuple((grid_index + 2).T)] = np.arange(n)
    nbr = np.empty((n, dim, 4), dtype=np.int64)
    for d in range(dim):
        for j, off in enumerate((-2, -1, 1, 2)):
            shifted = grid_index + 2
            shifted[:, d] += off
            nbr[:, d, j] = lookup[tuple(shifted.T)]
    return nbr


# ---------------------------------------------------------------- eigenvalue

def numeric_lambda0(operator, domain: Domain | None = None, tol=1e-12, max_iter=500,
                    seed=0):
    """Principal eigenvalue of ``-operator`` by inverse power iteration.

    ``operator`` is a :class:`kuznetsov.operators.DirichletOperator` (or any
    square sparse matrix acting on interior unknowns).  Iteration stops when
    the relative change of the Rayleigh quotient drops below ``tol``.
    """
    mat = getattr(operator, "A", operator)
    neg = (-mat).tocsc()
    lu = splu(neg)
    rng = np.random.default_rng(seed)
    x = np.abs(rng.standard_normal(neg.shape[0])) + 1.0
    x /= np.linalg.norm(x)
    lam_old = math.inf
    lam = math.nan
    for _ in range(max_iter):
        y = lu.solve(x)
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0:
            raise NumericalFailure("inverse iteration broke down", payload=x)
        x = y / ny
        lam = float(x @ (neg @ x))
        if abs(lam - lam_old) <= tol * abs(lam):
            return lam
        lam_old = lam
    raise NumericalFailure(
        f"inverse iteration did not reach tol={tol} in {max_iter} iterations",
        payload={"eigenvalue": lam, "vector": x})


# ---------------------------------------------------------------- norms

@dataclass(frozen=True)
class NormOrder:
    """Lebesgue exponent and integer Sobolev order (0: L_p, 1: W^1_p, 2: W^2_p)."""

    p: float = 2.0
    sobolev_order: int = 0

    def __post_init__(self):
        if not self.p > 1:
            raise InvalidArgumentError(f"norm exponent must exceed 1, got p={self.p}")
        if self.sobolev_order not in (0, 1, 2):
            raise InvalidArgumentError("sobolev_order must be 0, 1 or 2")

    def validate_for_data(self, dim):
        """Reject exponents outside ``p > max(1, n/2)``, and the excluded p = 3/2."""
        validate_exponent(self.p, dim)
        return self


def validate_exponent(p, dim=1):
    if p == 1.5:
        raise UnsupportedExponentError("p = 3/2 is excluded (trace space not covered)")
    if not p > max(1.0, dim / 2.0):
        raise UnsupportedExponentError(f"need p > max(1, n/2) = {max(1.0, dim / 2.0)}, got {p}")
    return p


def _as_components(field_values, n):
    a = np.asarray(field_values, dtype=float)
    if a.shape[0] != n:
        raise InvalidArgumentError(f"field has {a.shape[0]} values, domain has {n} nodes")
    return a.reshape(n, -1)


def discrete_norm(field_values, domain: Domain, order: NormOrder | int = 0,
                  p: float = 2.0) -> float:
    """Grid surrogate of the L_p / W^1_p / W^2_p norm.

    Scalar and vector fields are accepted (vector components are summed
    inside each term).  Terms are weighted by ``domain.cell_volume``, which is
    the trapezoid weight on intervals and rectangles and the clipped cell
    fraction for the disk.  Order 1 adds the L_p norm of the gradient, order 2
    additionally that of all second differences (compact central where both
    neighbours exist, one-sided otherwise; mixed ones from differencing the
    gradient).
    """
    if not isinstance(order, NormOrder):
        order = NormOrder(p=p, sobolev_order=int(order))
    p = order.p
    comps = _as_components(field_values, domain.n_nodes)
    w = domain.cell_volume
    total = kernels.lp_sum(comps, w, p) ** (1.0 / p)
    if order.sobolev_order == 0:
        return total
    grads = [kernels.gradient(comps[:, c], domain.nbr, domain.h) for c in range(comps.shape[1])]
    total += kernels.lp_sum(np.hstack(grads), w, p) ** (1.0 / p)
    if order.sobolev_order == 1:
        return total
    second = []
    for c, g in enumerate(grads):
        second.append(kernels.second_pure(comps[:, c], domain.nbr, domain.h))
        for d in range(domain.dim):
            for e in range(domain.dim):
                if d != e:
                    gde = kernels.gradient(g[:, d], domain.nbr, domain.h)[:, e]
                    ged = kernels.gradient(g[:, e], domain.nbr, domain.h)[:, d]
                    second.append((0.5 * (gde + ged))[:, None])
    total += kernels.lp_sum(np.hstack(second), w, p) ** (1.0 / p)
    return total
