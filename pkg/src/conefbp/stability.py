"""Stability classification of the symmetric one-homogeneous solution.

The solution is stable exactly when the boundary slope of the
exponent -1/2 comparison profile dominates the free-boundary mean
curvature, g'(phi0) >= H1 g(phi0).  The same number 1/H1 * g'/g is the
infimum of the boundary Rayleigh quotient

    E(F) = int_G g^ij F_i F_j  /  int_dG H F^2 dsigma

over axisymmetric F vanishing on the spherical ends of an annulus, so a
discrete inverse iteration on that quotient cross-checks the closed
form.  A radial test function exhibits the loss of stability for large
slopes, the critical slope is bisected from the sign of the margin, and
the connectivity bound from the radial second variation is audited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailureError,
    InvalidBracketError,
    InvalidParameterError,
    InvalidTestFunctionError,
    PropertyViolationError,
)
from .ode import beta_half_profile, symmetric_solution
from .quadrature import simpson_uniform

__all__ = [
    "StabilityReport",
    "ConnectivityReport",
    "SmoothBump",
    "stability_margin",
    "find_critical_c0",
    "radial_instability_witness",
    "second_variation_deficit",
    "steklov_min_quotient",
    "connectivity_bound_check",
]

_SWEEP_STEP = 1e-3


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of the boundary-slope stability criterion at one slope."""

    c: float
    phi0: float
    H1: float
    g_at_phi0: float
    gp_at_phi0: float
    margin: float
    stable: bool
    ratio: float | None = None
    steklov_lambda: float | None = None

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "phi0": self.phi0,
            "H1": self.H1,
            "g_at_phi0": self.g_at_phi0,
            "gp_at_phi0": self.gp_at_phi0,
            "margin": self.margin,
            "stable": self.stable,
            "ratio": self.ratio,
            "steklov_lambda": self.steklov_lambda,
        }


def stability_margin(
    c, step=_SWEEP_STEP, with_steklov=False, steklov_R=32.0, steklov_grid=(257, 129)
) -> StabilityReport:
    """Evaluate margin = g'(phi0) - H1 g(phi0) for the slope-c cone.

    The product form avoids dividing by H1, so the flat cone (H1 = 0) is
    regular.  The equivalent ratio -(sin/cos)(g'/g) at phi0 is reported
    only when the zero sits strictly beyond the equator, where the two
    forms are algebraically equivalent.
    """
    sol = symmetric_solution(c, step=step)
    g = beta_half_profile(c, step=step)
    gv, gp = g.value_and_deriv(sol.phi0)
    if gv <= 0.0:
        raise PropertyViolationError("comparison profile not positive at the free boundary angle")
    margin = gp - sol.H1 * gv
    ratio = None
    if sol.t0 < -1e-8:
        ratio = -(sol.sin_phi0 / sol.t0) * (gp / gv)
    lam = None
    if with_steklov:
        lam = steklov_min_quotient(
            c, steklov_R, num_r=steklov_grid[0], num_phi=steklov_grid[1], step=step
        )
    return StabilityReport(
        c=float(c),
        phi0=sol.phi0,
        H1=sol.H1,
        g_at_phi0=gv,
        gp_at_phi0=gp,
        margin=margin,
        stable=bool(margin >= 0.0),
        ratio=ratio,
        steklov_lambda=lam,
    )


def find_critical_c0(bracket, tol, step=_SWEEP_STEP, record=None) -> float:
    """Bisect the stability margin sign change inside ``bracket``.

    Requires margin > 0 at the low end and < 0 at the high end; each
    margin evaluation is appended to ``record`` when a list is supplied.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0.0 <= lo < hi and tol > 0.0):
        raise InvalidParameterError("bracket must satisfy 0 <= lo < hi with tol > 0")
    r_lo = stability_margin(lo, step=step)
    r_hi = stability_margin(hi, step=step)
    if record is not None:
        record.extend([r_lo, r_hi])
    if not (r_lo.margin > 0.0 > r_hi.margin):
        raise InvalidBracketError(
            f"margins at bracket ends do not straddle zero: {r_lo.margin}, {r_hi.margin}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        r = stability_margin(mid, step=step)
        if record is not None:
            record.append(r)
        if r.margin > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class SmoothBump:
    """C-infinity bump exp(-1/(1-t^2)) rescaled to the interval (a, b)."""

    def __init__(self, a=0.2, b=0.9):
        if not 0.0 <= a < b <= 1.0:
            raise InvalidParameterError("bump interval must satisfy 0 <= a < b <= 1")
        self.a = float(a)
        self.b = float(b)

    def _t(self, r):
        return (2.0 * np.asarray(r, dtype=float) - (self.a + self.b)) / (self.b - self.a)

    def __call__(self, r):
        t = self._t(r)
        out = np.zeros_like(t)
        inside = np.abs(t) < 1.0
        ti = t[inside]
        out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
        return out if out.ndim else float(out)

    def deriv(self, r):
        t = self._t(r)
        out = np.zeros_like(t)
        inside = np.abs(t) < 1.0
        ti = t[inside]
        core = np.exp(-1.0 / (1.0 - ti * ti))
        out[inside] = core * (-2.0 * ti / (1.0 - ti * ti) ** 2) * (2.0 / (self.b - self.a))
        return out if out.ndim else float(out)


def _check_radial_support(F, lo=0.02, hi=0.98):
    r = np.linspace(0.0, 1.0, 2001)
    vals = np.abs(np.asarray(F(r), dtype=float))
    peak = float(vals.max())
    if peak == 0.0:
        return 0.0
    edge = max(float(vals[r <= lo].max()), float(vals[r >= hi].max()))
    if edge > 1e-12 * peak:
        raise InvalidTestFunctionError("radial test function must vanish near 0 and 1")
    return peak


def radial_instability_witness(c, F, Fprime=None, num_r=4097, num_phi=513, step=_SWEEP_STEP):
    """Surface and bulk integrals of the radial second-variation test.

    Returns (lhs, rhs) with lhs the free-boundary surface integral of
    H F^2 and rhs the metric Dirichlet integral of the radial extension
    of F over the positivity cone, both by direct tensor quadrature in
    spherical coordinates with the flat volume normalization of the
    variational inequality.
    """
    sol = symmetric_solution(c, step=step)
    peak = _check_radial_support(F)
    if peak == 0.0:
        return 0.0, 0.0
    if Fprime is None:
        Fprime = getattr(F, "deriv", None)
    r = np.linspace(0.0, 1.0, num_r)
    fvals = np.asarray(F(r), dtype=float)
    # lhs: H = H1/r against the flat surface measure r sin(phi0) dr dtheta
    integrand = (sol.H1 / np.where(r == 0.0, 1.0, r)) * fvals**2 * (r * sol.sin_phi0) * 2.0 * math.pi
    lhs = simpson_uniform(integrand, r[1] - r[0])
    if Fprime is not None:
        fp = np.asarray(Fprime(r), dtype=float)
    else:
        h = 1e-6
        fp = (np.asarray(F(np.clip(r + h, 0, 1)), dtype=float) - np.asarray(F(np.clip(r - h, 0, 1)), dtype=float)) / (2 * h)
    phi = np.linspace(0.0, sol.phi0, num_phi if num_phi % 2 == 1 else num_phi + 1)
    radial = fp**2 / (1.0 + sol.c * sol.c) * r**2 * 2.0 * math.pi
    rad_int = simpson_uniform(radial, r[1] - r[0])
    ang_int = simpson_uniform(np.sin(phi), phi[1] - phi[0])
    rhs = rad_int * ang_int
    return float(lhs), float(rhs)


def second_variation_deficit(c, F, annulus, num_r=801, num_phi=401, fd_h=1e-6, step=_SWEEP_STEP):
    """Dirichlet integral minus boundary term for an axisymmetric test F.

    F is a callable of (r, phi) supported inside the annulus; partial
    derivatives are taken by central differences.  A nonnegative deficit
    for every admissible F is the discrete footprint of stability.
    """
    r1, r2 = float(annulus[0]), float(annulus[1])
    if not 0.0 < r1 < r2:
        raise InvalidParameterError("annulus must satisfy 0 < R1 < R2")
    sol = symmetric_solution(c, step=step)
    rs = np.linspace(r1, r2, num_r if num_r % 2 == 1 else num_r + 1)
    phis = np.linspace(0.0, sol.phi0, num_phi if num_phi % 2 == 1 else num_phi + 1)
    R, P = np.meshgrid(rs, phis, indexing="ij")
    vals = np.asarray(F(R, P), dtype=float)
    edge = max(np.abs(vals[0]).max(), np.abs(vals[-1]).max())
    if edge > 1e-10 * (1.0 + np.abs(vals).max()):
        raise InvalidTestFunctionError("test function must vanish at the annulus ends")
    hr = fd_h * (r2 - r1)
    hp = fd_h * math.pi
    Fr = (np.asarray(F(R + hr, P), dtype=float) - np.asarray(F(R - hr, P), dtype=float)) / (2 * hr)
    Fp = (np.asarray(F(R, P + hp), dtype=float) - np.asarray(F(R, P - hp), dtype=float)) / (2 * hp)
    bulk = (Fr**2 / (1.0 + sol.c**2) + Fp**2 / R**2) * R**2 * np.sin(P) * 2.0 * math.pi
    dr = rs[1] - rs[0]
    dp = phis[1] - phis[0]
    rows = np.array([simpson_uniform(bulk[i], dp) for i in range(bulk.shape[0])])
    dirichlet = simpson_uniform(rows, dr)
    fb = np.asarray(F(rs, np.full_like(rs, sol.phi0)), dtype=float)
    boundary = simpson_uniform((sol.H1 / rs) * fb**2 * rs * sol.sin_phi0 * 2.0 * math.pi, dr)
    return float(dirichlet - boundary)


def _edge_apply(u, wr, wp):
    out = np.zeros_like(u)
    d = wr * (u[1:, :] - u[:-1, :])
    out[1:, :] += d
    out[:-1, :] -= d
    e = wp * (u[:, 1:] - u[:, :-1])
    out[:, 1:] += e
    out[:, :-1] -= e
    return out


def _edge_diag(wr, wp, shape):
    diag = np.zeros(shape)
    diag[1:, :] += wr
    diag[:-1, :] += wr
    diag[:, 1:] += wp
    diag[:, :-1] += wp
    return diag


def _pcg(apply_a, b, x0, diag, tol, max_iter):
    x = x0.copy()
    r = b - apply_a(x)
    z = r / diag
    p = z.copy()
    rz = float(np.sum(r * z))
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), []
    log = []
    for it in range(max_iter):
        ap = apply_a(p)
        alpha = rz / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        res = float(np.linalg.norm(r)) / bnorm
        if it % 50 == 0 or res <= tol:
            log.append((it, res))
        if res <= tol:
            return x, log
        z = r / diag
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceFailureError(f"conjugate gradient stalled at relative residual {res:.3e}", log=log, iterate=x)


def steklov_min_quotient(
    c,
    R,
    num_r=257,
    num_phi=129,
    tol=1e-10,
    max_iter=200,
    step=_SWEEP_STEP,
    cg_tol=1e-12,
    cg_max_iter=40000,
) -> float:
    """Minimum of the discrete boundary Rayleigh quotient on (1/R, R).

    Discretizes axisymmetric fields on a grid uniform in log r (which
    resolves the near-optimal r^(-1/2) profile with few nodes) and in
    phi on [0, phi0], with fields vanishing at both radial ends, and
    runs inverse power iteration on the generalized eigenproblem
    A F = lambda B F, where A is the metric Dirichlet form and B the
    free-boundary mass weighted by the mean curvature.
    """
    c = float(c)
    if c <= 0.0:
        raise InvalidParameterError("boundary quotient needs c > 0 so the curvature is positive")
    if R < 4.0:
        raise InvalidParameterError("annulus ratio R must be at least 4")
    sol = symmetric_solution(c, step=step)
    rho_max = math.log(R)
    rho = np.linspace(-rho_max, rho_max, num_r)
    phi = np.linspace(0.0, sol.phi0, num_phi)
    drho = rho[1] - rho[0]
    dphi = phi[1] - phi[0]
    rho_cell = np.full(num_r, drho)
    rho_cell[[0, -1]] = 0.5 * drho
    phi_cell = np.full(num_phi, dphi)
    phi_cell[[0, -1]] = 0.5 * dphi
    one = 1.0 + c * c
    # Dirichlet form int [F_rho^2/(1+c^2) + F_phi^2] e^rho sin(phi)
    erho_mid = np.exp(0.5 * (rho[1:] + rho[:-1]))
    wr = (erho_mid[:, None] * np.sin(phi)[None, :] / one) * (phi_cell[None, :] / drho)
    sin_mid = np.sin(0.5 * (phi[1:] + phi[:-1]))
    wp = (np.exp(rho)[:, None] * sin_mid[None, :]) * (rho_cell[:, None] / dphi)
    bdiag = np.zeros((num_r, num_phi))
    bdiag[:, -1] = abs(sol.t0) * np.exp(rho) * rho_cell

    free = np.ones((num_r, num_phi), dtype=bool)
    free[0, :] = False
    free[-1, :] = False

    def apply_a(u):
        out = _edge_apply(u, wr, wp)
        out[~free] = 0.0
        return out

    diag = _edge_diag(wr, wp, (num_r, num_phi))
    diag[~free] = 1.0

    x = np.zeros((num_r, num_phi))
    x[free] = 1.0
    bx = bdiag * x
    lam_prev = math.inf
    for _ in range(max_iter):
        y, _ = _pcg(apply_a, np.where(free, bx, 0.0), x, diag, cg_tol, cg_max_iter)
        y[~free] = 0.0
        nrm = math.sqrt(float(np.sum(bdiag * y * y)))
        if nrm == 0.0:
            raise ConvergenceFailureError("iterate lost mass on the free boundary row")
        y /= nrm
        lam = float(np.sum(y * _edge_apply(y, wr, wp)))
        if abs(lam - lam_prev) <= tol * max(1.0, abs(lam)):
            return lam
        lam_prev = lam
        x = y
        bx = bdiag * x
    raise ConvergenceFailureError(f"inverse iteration did not settle after {max_iter} sweeps")


def steklov_trial_quotient(
    c, R, trial, num_r=257, num_phi=129, step=_SWEEP_STEP, clamp_ends=True
) -> float:
    """Rayleigh quotient of a supplied trial field on the discrete annulus.

    trial is a callable of (rho, phi) with rho = log r; its values are
    clamped to zero on the radial ends so the trial is admissible, hence
    the result upper-bounds steklov_min_quotient on the same grid.  With
    clamp_ends disabled the quotient of the free trial is returned; for
    the separated power-law profile the radial fluxes cancel and the
    quotient collapses to the closed form at any annulus.
    """
    c = float(c)
    sol = symmetric_solution(c, step=step)
    rho_max = math.log(R)
    rho = np.linspace(-rho_max, rho_max, num_r)
    phi = np.linspace(0.0, sol.phi0, num_phi)
    drho = rho[1] - rho[0]
    dphi = phi[1] - phi[0]
    rho_cell = np.full(num_r, drho)
    rho_cell[[0, -1]] = 0.5 * drho
    phi_cell = np.full(num_phi, dphi)
    phi_cell[[0, -1]] = 0.5 * dphi
    one = 1.0 + c * c
    erho_mid = np.exp(0.5 * (rho[1:] + rho[:-1]))
    wr = (erho_mid[:, None] * np.sin(phi)[None, :] / one) * (phi_cell[None, :] / drho)
    sin_mid = np.sin(0.5 * (phi[1:] + phi[:-1]))
    wp = (np.exp(rho)[:, None] * sin_mid[None, :]) * (rho_cell[:, None] / dphi)
    rr, pp = np.meshgrid(rho, phi, indexing="ij")
    x = np.asarray(trial(rr, pp), dtype=float)
    if clamp_ends:
        x[0, :] = 0.0
        x[-1, :] = 0.0
    num = float(np.sum(x * _edge_apply(x, wr, wp)))
    den = float(np.sum(abs(sol.t0) * np.exp(rho) * rho_cell * x[:, -1] ** 2))
    if den <= 0.0:
        raise InvalidTestFunctionError("trial carries no mass on the free boundary row")
    return num / den


@dataclass(frozen=True)
class ConnectivityReport:
    """Audit of the total-turning bound from the radial second variation."""

    c: float
    phi0: float
    total_turning: float
    bound: float
    holds: bool
    chain_lhs: float
    chain_rhs_single: float
    chain_holds: bool
    two_component_contradiction: bool


def connectivity_bound_check(c, step=_SWEEP_STEP) -> ConnectivityReport:
    """Check total turning <= areaU / (4 (1+c^2)) and the component count chain.

    With two complement components the chain upper bound drops to zero
    while the left side stays positive, which is the contradiction that
    forces a single component.
    """
    sol = symmetric_solution(c, step=step)
    kappa = sol.H1
    total = kappa * 2.0 * math.pi * sol.sin_phi0
    area_u = 2.0 * math.pi * (1.0 - sol.t0)
    one = 1.0 + sol.c * sol.c
    bound = area_u / (4.0 * one)
    chain_lhs = (1.0 - 1.0 / (4.0 * one)) * area_u
    chain_rhs_single = 4.0 * math.pi - 2.0 * math.pi
    return ConnectivityReport(
        c=float(c),
        phi0=sol.phi0,
        total_turning=total,
        bound=bound,
        holds=bool(total <= bound + 1e-12),
        chain_lhs=chain_lhs,
        chain_rhs_single=chain_rhs_single,
        chain_holds=bool(0.0 < chain_lhs <= chain_rhs_single + 1e-12),
        two_component_contradiction=bool(chain_lhs > 4.0 * math.pi - 4.0 * math.pi),
    )
