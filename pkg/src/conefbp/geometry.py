"""Exact geometry of the cone x4 = c|x| in R^4 and of spherical caps.

The cone inherits its metric from the ambient space.  In spherical
coordinates (r, theta, phi) the inverse metric is diagonal with area
form r^2 sin(phi) sqrt(1+c^2); in the projected Cartesian chart
(x1, x2, x3) it is a full symmetric positive definite matrix.  This
module also provides spherical cap areas and curvatures with their
Gauss-Bonnet audit, the homogeneity exponent of separated harmonics,
and the classical threshold for a plane through the vertex of a
k-dimensional cone to be area minimizing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidParameterError,
    PoleDegeneracyError,
    VertexSingularityError,
)
from .quadrature import adaptive_simpson

__all__ = [
    "ConeParam",
    "CapGeometry",
    "homogeneity_exponent",
    "metric_spherical",
    "metric_cartesian",
    "cap_geometry",
    "morgan_threshold",
    "is_minimizing",
]


def _check_slope(c) -> float:
    c = float(c)
    if not math.isfinite(c) or c < 0.0:
        raise InvalidParameterError(f"cone slope must be finite and >= 0, got {c!r}")
    return c


def homogeneity_exponent(c) -> float:
    """Positive root of a(a+1) = 2/(1+c^2).

    Lies in (0, 1] and equals 1 exactly when the cone is flat (c = 0).
    """
    c = _check_slope(c)
    return 0.5 * (-1.0 + math.sqrt(1.0 + 8.0 / (1.0 + c * c)))


@dataclass(frozen=True)
class ConeParam:
    """Cone opening constant together with its derived scalars."""

    c: float
    one_plus_c2: float
    delta: float
    alpha: float

    @classmethod
    def from_slope(cls, c) -> "ConeParam":
        c = _check_slope(c)
        one = 1.0 + c * c
        return cls(c=c, one_plus_c2=one, delta=1.0 / math.sqrt(one), alpha=homogeneity_exponent(c))


def metric_spherical(param: ConeParam, r: float, phi: float):
    """Inverse metric diagonal (g^rr, g^tt, g^pp) and area form at (r, phi).

    The theta entry degenerates on the polar axis, so phi must stay in
    the open interval (0, pi).
    """
    r = float(r)
    phi = float(phi)
    if not (r > 0.0 and math.isfinite(r)):
        raise InvalidParameterError(f"radius must be positive, got {r!r}")
    if not 0.0 < phi < math.pi:
        raise PoleDegeneracyError(f"polar angle must lie in (0, pi), got {phi!r}")
    s = math.sin(phi)
    if s == 0.0:
        raise PoleDegeneracyError("polar angle at a pole: theta metric entry undefined")
    g_rr = 1.0 / param.one_plus_c2
    g_tt = 1.0 / (r * r * s * s)
    g_pp = 1.0 / (r * r)
    area_form = r * r * s * math.sqrt(param.one_plus_c2)
    return (g_rr, g_tt, g_pp), area_form


def metric_cartesian(param: ConeParam, x) -> np.ndarray:
    """Inverse metric matrix in the projected chart at x in R^3 minus 0.

    Equals I - c^2/((1+c^2) r^2) x x^T: eigenvalues are 1 (twice,
    tangential) and 1/(1+c^2) (radial), so the matrix is symmetric
    positive definite away from the vertex.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise InvalidParameterError(f"expected a point in R^3, got shape {x.shape}")
    r2 = float(x @ x)
    if r2 == 0.0:
        raise VertexSingularityError("inverse metric undefined at the cone vertex")
    c2 = param.c * param.c
    return np.eye(3) - (c2 / (param.one_plus_c2 * r2)) * np.outer(x, x)


@dataclass(frozen=True)
class CapGeometry:
    """Geometry of the spherical cap {phi < phi0} and its complement."""

    phi0: float
    t0: float
    H1: float
    kappa: float
    areaU: float
    areaV: float
    boundary_length: float


def cap_geometry(phi0: float) -> CapGeometry:
    """Areas and curvatures of the latitude cap at polar angle phi0.

    kappa is the geodesic curvature of the latitude circle signed with
    respect to the complement cap V = {phi > phi0}; with this convention
    the Gauss-Bonnet identity areaV + kappa * length = 2 pi holds and
    kappa agrees with the radius-one mean curvature H1 = -cot(phi0) of
    the cone over the circle.  The cap area is cross-checked against an
    adaptive quadrature of sin(phi).
    """
    phi0 = float(phi0)
    if not 0.0 < phi0 < math.pi:
        raise InvalidParameterError(f"cap angle must lie in (0, pi), got {phi0!r}")
    t0 = math.cos(phi0)
    s0 = math.sin(phi0)
    h1 = -t0 / s0
    area_u = 2.0 * math.pi * (1.0 - t0)
    area_quad = 2.0 * math.pi * adaptive_simpson(math.sin, 0.0, phi0, tol=1e-12)
    if abs(area_u - area_quad) > 1e-9 * (1.0 + area_u):
        raise InvalidParameterError(
            f"cap area quadrature disagrees with closed form: {area_quad} vs {area_u}"
        )
    return CapGeometry(
        phi0=phi0,
        t0=t0,
        H1=h1,
        kappa=h1,
        areaU=area_u,
        areaV=4.0 * math.pi - area_u,
        boundary_length=2.0 * math.pi * s0,
    )


def _check_plane_dimension(k) -> int:
    if not float(k).is_integer():
        raise InvalidParameterError(f"plane dimension must be an integer, got {k!r}")
    k = int(k)
    if k < 2:
        raise InvalidParameterError(f"plane dimension must be >= 2, got {k}")
    return k


def morgan_threshold(k) -> float:
    """Largest slope at which a k-plane through the vertex is minimizing.

    Solves delta^2 = 4(k-1)/k^2 under delta = 1/sqrt(1+c^2), giving
    (k-2)/(2 sqrt(k-1)).  The value degenerates to 0 at k = 2, where the
    minimality predicate is false for every slope.
    """
    k = _check_plane_dimension(k)
    return (k - 2.0) / (2.0 * math.sqrt(k - 1.0))


def is_minimizing(k, c) -> bool:
    """Whether a k-plane through the vertex of the slope-c cone minimizes area."""
    k = _check_plane_dimension(k)
    c = _check_slope(c)
    if k < 3:
        return False
    return c <= morgan_threshold(k)
