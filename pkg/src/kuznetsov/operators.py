"""Discrete Dirichlet Laplacian, gradient, trace and boundary coupling.

Boundary unknowns are eliminated: the Laplacian acts on interior values and
the Dirichlet values enter through a separate coupling matrix, so that on
intervals and rectangles the interior matrix is symmetric negative definite.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import kernels
from .domain import Disk, Domain
from .errors import InvalidArgumentError


class DirichletOperator:
    """``Lap(u)|_interior = A @ u[interior] + B @ u[boundary]``.

    Assembled once per domain (see :func:`dirichlet_operator`) and treated as
    immutable afterwards.
    """

    def __init__(self, domain: Domain, A, B, full=None):
        self.domain = domain
        self.A = A.tocsr()
        self.B = B.tocsr()
        # (n_interior, n_nodes) matrix acting on a full nodal vector
        self.full = full

    def apply(self, interior_values, boundary_values):
        return apply_dirichlet(self, interior_values, boundary_values)


def _assemble(domain: Domain):
    n = domain.n_nodes
    rows, cols, vals = [], [], []
    interior = domain.interior
    diag = np.zeros(len(interior))
    disk = isinstance(domain.geometry, Disk)
    for d in range(domain.dim):
        h = domain.h[d]
        m1 = domain.nbr[interior, d, 1]
        p1 = domain.nbr[interior, d, 2]
        if np.any(m1 < 0) or np.any(p1 < 0):
            raise InvalidArgumentError("interior node without both axis neighbours")
        if disk:
            hl = _leg(domain, interior, m1, d, -1)
            hr = _leg(domain, interior, p1, d, +1)
        else:
            hl = np.full(len(interior), h)
            hr = np.full(len(interior), h)
        cl = 2.0 / (hl * (hl + hr))
        cr = 2.0 / (hr * (hl + hr))
        diag -= cl + cr
        rows += [np.arange(len(interior))] * 2
        cols += [m1, p1]
        vals += [cl, cr]
    rows.append(np.arange(len(interior)))
    cols.append(interior)
    vals.append(diag)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    L = sp.csr_matrix((vals, (rows, cols)), shape=(len(interior), n))
    L.sum_duplicates()
    A = L[:, domain.interior]
    B = L[:, domain.boundary]
    return DirichletOperator(domain, A, B, L)


def _leg(domain, nodes, nbrs, axis, direction):
    """Distance from interior node to the circle along ``axis`` (Shortley-Weller leg)."""
    h = domain.h[axis]
    legs = np.full(len(nodes), h)
    to_bnd = domain.is_boundary[nbrs]
    if not np.any(to_bnd):
        return legs
    R = domain.geometry.radius
    xy = domain.coords[nodes[to_bnd]]
    along = xy[:, axis]
    other = xy[:, 1 - axis]
    reach = np.sqrt(np.maximum(R * R - other * other, 0.0))
    s = reach - direction * along
    legs[to_bnd] = np.clip(s, 1e-3 * h, h)
    return legs


def dirichlet_operator(domain: Domain) -> DirichletOperator:
    op = getattr(domain, "_dirichlet_operator", None)
    if op is None:
        op = _assemble(domain)
        domain._dirichlet_operator = op
    return op


def extend(domain: Domain, interior_values, boundary_values):
    """Assemble a full nodal vector from interior and boundary parts."""
    out = np.empty(domain.n_nodes)
    out[domain.interior] = interior_values
    out[domain.boundary] = boundary_values
    return out


def boundary_trace(field_values, domain: Domain):
    """Restriction of a nodal field to the boundary nodes."""
    return np.asarray(field_values, dtype=float)[domain.boundary].copy()


def _check_boundary(boundary_values, domain):
    bv = np.asarray(boundary_values, dtype=float)
    if bv.ndim == 0:
        bv = np.full(len(domain.boundary), float(bv))
    if bv.shape != (len(domain.boundary),) or not np.all(np.isfinite(bv)):
        raise InvalidArgumentError(
            f"boundary values must be finite with shape ({len(domain.boundary)},)")
    return bv


def apply_dirichlet(operator: DirichletOperator, interior_values, boundary_values):
    d = operator.domain
    ui = np.asarray(interior_values, dtype=float)
    if ui.shape != (len(d.interior),):
        raise InvalidArgumentError(
            f"interior vector has shape {ui.shape}, expected ({len(d.interior)},)")
    bv = _check_boundary(boundary_values, d)
    return operator.A @ ui + operator.B @ bv


def laplacian(field_values, boundary_values, domain: Domain):
    """Discrete Laplacian of ``field_values`` with Dirichlet data folded in.

    The result is a nodal field; entries at boundary nodes are zero.
    """
    op = dirichlet_operator(domain)
    u = np.asarray(field_values, dtype=float)
    out = np.zeros(domain.n_nodes)
    out[domain.interior] = apply_dirichlet(op, u[domain.interior], boundary_values)
    return out


def gradient(field_values, domain: Domain):
    """Nodal gradient, shape ``(n_nodes, dim)``; one-sided stencils on the boundary."""
    return kernels.gradient(np.asarray(field_values, dtype=float), domain.nbr, domain.h)


def gradient_matrices(domain: Domain):
    """Sparse ``(n_nodes, n_nodes)`` matrices reproducing :func:`gradient` per axis."""
    mats = getattr(domain, "_gradient_matrices", None)
    if mats is not None:
        return mats
    n = domain.n_nodes
    idx = np.arange(n)
    mats = []
    for d in range(domain.dim):
        h = domain.h[d]
        m2, m1, p1, p2 = (domain.nbr[:, d, j] for j in range(4))
        central = (m1 >= 0) & (p1 >= 0)
        fwd2 = ~central & (p1 >= 0) & (p2 >= 0)
        bwd2 = ~central & ~fwd2 & (m1 >= 0) & (m2 >= 0)
        fwd1 = ~central & ~fwd2 & ~bwd2 & (p1 >= 0)
        bwd1 = ~central & ~fwd2 & ~bwd2 & ~fwd1 & (m1 >= 0)
        stencils = [
            (central, [(p1, 1.0), (m1, -1.0)], 2.0 * h),
            (fwd2, [(idx, -3.0), (p1, 4.0), (p2, -1.0)], 2.0 * h),
            (bwd2, [(idx, 3.0), (m1, -4.0), (m2, 1.0)], 2.0 * h),
            (fwd1, [(p1, 1.0), (idx, -1.0)], h),
            (bwd1, [(idx, 1.0), (m1, -1.0)], h),
        ]
        rows, cols, vals = [], [], []
        for mask, terms, denom in stencils:
            r = idx[mask]
            for col, coef in terms:
                rows.append(r)
                cols.append(col[mask])
                vals.append(np.full(len(r), coef / denom))
        G = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n))
        mats.append(G)
    domain._gradient_matrices = mats
    return mats


def smallest_eigenvalue_closed_form(domain: Domain) -> float:
    """``sum_d (2/h_d^2)(1 - cos(pi h_d / l_d))`` for intervals and rectangles."""
    geom = domain.geometry
    if geom.kind == "interval":
        lengths = [geom.length]
    elif geom.kind == "rectangle":
        lengths = [geom.lx, geom.ly]
    else:
        raise InvalidArgumentError("closed form only for interval and rectangle")
    return float(sum((2.0 / h ** 2) * (1.0 - np.cos(np.pi * h / l))
                     for h, l in zip(domain.h, lengths)))
