"""Axisymmetric finite-difference fields on the punctured cone.

Fields live on a tensor grid (r, phi) in [r_min, 1] x [0, pi] with the
vertex excluded (quantities of interest grow linearly in r, so values
extrapolate linearly to r = 0).  The module provides the axisymmetric
cone Laplacian in non-conservative node form for residual audits, a
symmetric conservative edge form driving conjugate-gradient Dirichlet
solves (with optional cut-cell weights for plane boundaries that do not
align with the grid), metric gradient magnitudes, and plain-text
serialization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConvergenceFailureError,
    GridMismatchError,
    InvalidParameterError,
)
from .quadrature import trapezoid_weights

__all__ = [
    "AxisymField",
    "make_field",
    "field_from_solution",
    "apply_laplace_beltrami",
    "dirichlet_solve",
    "gradient_c",
    "gradient_sq_field",
    "save_field_text",
    "load_field_text",
    "field_to_csv",
]


@dataclass
class AxisymField:
    """Nonnegative axisymmetric samples u(r_i, phi_j) on the cone."""

    r: np.ndarray
    phi: np.ndarray
    values: np.ndarray
    c: float
    dirichlet: np.ndarray

    @property
    def shape(self):
        return self.values.shape

    @property
    def r_min(self) -> float:
        return float(self.r[0])

    def with_values(self, values: np.ndarray) -> "AxisymField":
        return replace(self, values=values)

    def same_grid(self, other: "AxisymField") -> bool:
        return (
            self.values.shape == other.values.shape
            and np.array_equal(self.r, other.r)
            and np.array_equal(self.phi, other.phi)
        )


def make_field(nr, nphi, c, r_min=None, values=None, spacing="uniform") -> AxisymField:
    """Grid on [r_min, 1] x [0, pi]; radial spacing uniform or geometric."""
    nr = int(nr)
    nphi = int(nphi)
    if nr < 4 or nphi < 4:
        raise InvalidParameterError("grid needs at least 4 nodes per direction")
    if r_min is None:
        r_min = 1.0 / nr
    if not 0.0 < r_min < 1.0:
        raise InvalidParameterError("r_min must lie in (0, 1)")
    if spacing == "uniform":
        r = np.linspace(r_min, 1.0, nr)
    elif spacing == "geometric":
        r = np.geomspace(r_min, 1.0, nr)
    else:
        raise InvalidParameterError(f"unknown radial spacing {spacing!r}")
    phi = np.linspace(0.0, math.pi, nphi)
    if values is None:
        values = np.zeros((nr, nphi))
    values = np.asarray(values, dtype=float)
    if values.shape != (nr, nphi):
        raise GridMismatchError("values shape does not match the grid")
    if np.any(values < 0.0):
        raise InvalidParameterError("field values must be nonnegative")
    dirichlet = np.zeros((nr, nphi), dtype=bool)
    dirichlet[-1, :] = True
    return AxisymField(r=r, phi=phi, values=values, c=float(c), dirichlet=dirichlet)


def field_from_solution(sol, nr, nphi, r_min=None) -> AxisymField:
    """Sample the symmetric solution r f(phi), clipped at zero, on a grid."""
    field = make_field(nr, nphi, sol.c, r_min=r_min)
    fvals = np.zeros_like(field.phi)
    inside = field.phi < sol.phi0
    fvals[inside] = sol.profile.sample(field.phi[inside])[0]
    fvals = np.clip(fvals, 0.0, None)
    field.values = np.outer(field.r, fvals)
    return field


def _d_dr(values, r):
    out = np.empty_like(values)
    dr0 = r[1:-1] - r[:-2]
    dr1 = r[2:] - r[1:-1]
    # three-point first derivative, exact for quadratics on uneven grids
    w0 = -dr1 / (dr0 * (dr0 + dr1))
    w2 = dr0 / (dr1 * (dr0 + dr1))
    w1 = -(w0 + w2)
    out[1:-1] = w0[:, None] * values[:-2] + w1[:, None] * values[1:-1] + w2[:, None] * values[2:]
    h0 = r[1] - r[0]
    h1 = r[2] - r[1]
    a = -(2 * h0 + h1) / (h0 * (h0 + h1))
    b = (h0 + h1) / (h0 * h1)
    cc = -h0 / (h1 * (h0 + h1))
    out[0] = a * values[0] + b * values[1] + cc * values[2]
    h0 = r[-1] - r[-2]
    h1 = r[-2] - r[-3]
    a = (2 * h0 + h1) / (h0 * (h0 + h1))
    b = -(h0 + h1) / (h0 * h1)
    cc = h0 / (h1 * (h0 + h1))
    out[-1] = a * values[-1] + b * values[-2] + cc * values[-3]
    return out


def _d2_dr(values, r):
    out = np.empty_like(values)
    dr0 = r[1:-1] - r[:-2]
    dr1 = r[2:] - r[1:-1]
    w0 = 2.0 / (dr0 * (dr0 + dr1))
    w2 = 2.0 / (dr1 * (dr0 + dr1))
    w1 = -(w0 + w2)
    out[1:-1] = w0[:, None] * values[:-2] + w1[:, None] * values[1:-1] + w2[:, None] * values[2:]
    # four-point one-sided second derivative, second order on uniform grids
    out[0] = _onesided_d2(values, r, 0, 1)
    out[-1] = _onesided_d2(values, r, len(r) - 1, -1)
    return out


def _onesided_d2(values, x, i0, direction):
    idx = [i0, i0 + direction, i0 + 2 * direction, i0 + 3 * direction]
    xs = x[idx] - x[i0]
    v = np.vander(xs, 4, increasing=True).T
    rhs = np.zeros(4)
    rhs[2] = 2.0
    w = np.linalg.solve(v, rhs)
    return sum(w[k] * values[idx[k]] for k in range(4))


def apply_laplace_beltrami(field: AxisymField) -> np.ndarray:
    """Node residual of the axisymmetric cone Laplacian.

    Returns (1/(1+c^2))(u_rr + 2 u_r / r) + (1/r^2)(cot(phi) u_phi + u_phiphi)
    by second-order differences; at the polar columns the angular part
    degenerates to twice the reflected second difference.
    """
    u = field.values
    r = field.r
    phi = field.phi
    if r[0] <= 0.0:
        raise InvalidParameterError("grid touches the vertex; radial stencil undefined")
    one = 1.0 + field.c * field.c
    ur = _d_dr(u, r)
    urr = _d2_dr(u, r)
    radial = (urr + 2.0 * ur / r[:, None]) / one
    h = phi[1] - phi[0]
    ang = np.empty_like(u)
    up = (u[:, 2:] - u[:, :-2]) / (2.0 * h)
    upp = (u[:, 2:] - 2.0 * u[:, 1:-1] + u[:, :-2]) / (h * h)
    cot = np.cos(phi[1:-1]) / np.sin(phi[1:-1])
    ang[:, 1:-1] = cot[None, :] * up + upp
    # reflected ghost at the poles: u_phi = 0, cot u_phi + u_phiphi -> 2 u_phiphi
    ang[:, 0] = 4.0 * (u[:, 1] - u[:, 0]) / (h * h)
    ang[:, -1] = 4.0 * (u[:, -2] - u[:, -1]) / (h * h)
    return radial + ang / (r[:, None] ** 2)


def dirichlet_edge_weights(field: AxisymField):
    """Edge weights of the conservative Dirichlet form.

    The quadratic form sum wr (du_r)^2 + wp (du_phi)^2 is the
    edge-midpoint tensor quadrature of int |grad_c u|^2 r^2 sin(phi),
    without the constant 2 pi sqrt(1+c^2) prefactor.
    """
    r = field.r
    phi = field.phi
    one = 1.0 + field.c * field.c
    rw = trapezoid_weights(r)
    r_mid = 0.5 * (r[1:] + r[:-1])
    dr = r[1:] - r[:-1]
    # exact cell integrals of sin(phi): keeps the pole columns radially
    # coupled (the node value of sin vanishes there)
    lo = np.concatenate([[phi[0]], 0.5 * (phi[1:] + phi[:-1])])
    hi = np.concatenate([0.5 * (phi[1:] + phi[:-1]), [phi[-1]]])
    sin_cell = np.cos(lo) - np.cos(hi)
    wr = (r_mid[:, None] ** 2 / one) * sin_cell[None, :] * (1.0 / dr[:, None])
    phi_mid = 0.5 * (phi[1:] + phi[:-1])
    dphi = phi[1:] - phi[:-1]
    wp = np.sin(phi_mid)[None, :] * (rw[:, None] / dphi[None, :])
    return wr, wp


def edge_apply(u, wr, wp):
    """Gradient of half the edge form: the conservative operator."""
    out = np.zeros_like(u)
    d = wr * (u[1:, :] - u[:-1, :])
    out[1:, :] += d
    out[:-1, :] -= d
    e = wp * (u[:, 1:] - u[:, :-1])
    out[:, 1:] += e
    out[:, :-1] -= e
    return out


def edge_diag(wr, wp, shape):
    diag = np.zeros(shape)
    diag[1:, :] += wr
    diag[:-1, :] += wr
    diag[:, 1:] += wp
    diag[:, :-1] += wp
    return diag


def dirichlet_solve(
    field: AxisymField,
    unknown=None,
    tol: float = 1e-10,
    max_iter: int = 60000,
    weight_scale=None,
) -> AxisymField:
    """Solve the cone Laplace equation on the unknown node set.

    Nodes outside ``unknown`` keep their current values as Dirichlet
    data.  The solve runs preconditioned conjugate gradients on the
    symmetric conservative form to relative residual ``tol``; failure
    raises ConvergenceFailureError carrying the iteration log.
    ``weight_scale`` optionally rescales the (wr, wp) edge weights, which
    implements shortened cut-cell edges at non-grid-aligned boundaries.
    """
    if unknown is None:
        unknown = ~field.dirichlet
    unknown = np.asarray(unknown, dtype=bool)
    if unknown.shape != field.values.shape:
        raise GridMismatchError("unknown mask shape does not match the field")
    wr, wp = dirichlet_edge_weights(field)
    if weight_scale is not None:
        wr = wr * weight_scale[0]
        wp = wp * weight_scale[1]

    fixed_vals = np.where(unknown, 0.0, field.values)

    def apply_a(x):
        out = edge_apply(x, wr, wp)
        return np.where(unknown, out, 0.0)

    b = -edge_apply(fixed_vals, wr, wp)
    b = np.where(unknown, b, 0.0)
    diag = edge_diag(wr, wp, field.values.shape)
    diag = np.where(unknown & (diag > 0.0), diag, 1.0)

    x = np.where(unknown, field.values, 0.0)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        sol = fixed_vals
    else:
        r_vec = b - apply_a(x)
        z = r_vec / diag
        p = z.copy()
        rz = float(np.sum(r_vec * z))
        log = []
        for it in range(max_iter):
            ap = apply_a(p)
            denom = float(np.sum(p * ap))
            if denom <= 0.0:
                raise ConvergenceFailureError("conservative form lost positivity", log=log, iterate=x)
            alpha = rz / denom
            x += alpha * p
            r_vec -= alpha * ap
            res = float(np.linalg.norm(r_vec)) / bnorm
            if it % 100 == 0 or res <= tol:
                log.append((it, res))
            if res <= tol:
                break
            z = r_vec / diag
            rz_new = float(np.sum(r_vec * z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        else:
            raise ConvergenceFailureError(
                f"Dirichlet solve stalled at relative residual {res:.3e}", log=log, iterate=x
            )
        sol = np.where(unknown, x, field.values)
    return field.with_values(sol)


def gradient_sq_field(field: AxisymField) -> np.ndarray:
    """Metric gradient magnitude squared at every node.

    Second-order differences, one-sided at the grid edges:
    |grad_c u|^2 = u_r^2/(1+c^2) + u_phi^2/r^2.
    """
    u = field.values
    ur = _d_dr(u, field.r)
    up = _d_dr(u.T, field.phi).T
    one = 1.0 + field.c * field.c
    return ur**2 / one + up**2 / field.r[:, None] ** 2


def gradient_c(field: AxisymField, i: int, j: int, interior_only=False) -> float:
    """Metric gradient magnitude squared at one node."""
    if interior_only and (i in (0, field.shape[0] - 1) or j in (0, field.shape[1] - 1)):
        raise InvalidParameterError("node is not interior")
    return float(gradient_sq_field(field)[i, j])


def save_field_text(field: AxisymField, path) -> None:
    lines = [
        f"Nr={field.shape[0]}",
        f"Nphi={field.shape[1]}",
        "r_min=%.17g" % field.r_min,
        "c=%.17g" % field.c,
    ]
    for row in field.values:
        lines.append(" ".join("%.17g" % v for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field_text(path) -> AxisymField:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    header = {}
    rows = []
    for ln in lines:
        if "=" in ln:
            key, _, val = ln.partition("=")
            header[key.strip()] = val.strip()
        else:
            rows.append([float(tok) for tok in ln.split()])
    nr = int(header["Nr"])
    nphi = int(header["Nphi"])
    values = np.asarray(rows, dtype=float)
    if values.shape != (nr, nphi):
        raise GridMismatchError("snapshot body does not match its header")
    return make_field(nr, nphi, float(header["c"]), r_min=float(header["r_min"]), values=values)


def field_to_csv(field: AxisymField, path) -> None:
    with open(path, "w") as fh:
        fh.write("r,phi,value\n")
        for i, rv in enumerate(field.r):
            for j, pv in enumerate(field.phi):
                fh.write("%.17g,%.17g,%.17g\n" % (rv, pv, field.values[i, j]))
