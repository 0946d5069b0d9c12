import math

import numpy as np
import pytest

from conefbp.errors import (
    InvalidBracketError,
    InvalidParameterError,
    InvalidTestFunctionError,
)
from conefbp.quadrature import simpson_uniform
from conefbp.stability import (
    SmoothBump,
    connectivity_bound_check,
    find_critical_c0,
    radial_instability_witness,
    second_variation_deficit,
    stability_margin,
    steklov_min_quotient,
    steklov_trial_quotient,
)

from conftest import legendre_series

# regression anchor, stable to < 1e-7 under ODE step halving (1e-3 -> 5e-4)
C0_ANCHOR = 0.5884039


class TestStabilityMargin:
    def test_flat_cone_stable_with_zero_curvature(self):
        rep = stability_margin(0.0)
        assert rep.stable
        assert abs(rep.H1) < 1e-8
        # margin at c=0 equals g'(pi/2) of the comparison profile: oracle
        # from the series solution differentiated at the equator
        h = 1e-6
        gp = (legendre_series(-0.25, math.pi / 2 + h) - legendre_series(-0.25, math.pi / 2 - h)) / (2 * h)
        assert abs(rep.margin - gp) < 1e-6
        assert rep.ratio is None

    def test_small_slope_stable(self):
        assert stability_margin(0.05).stable

    def test_large_slope_unstable(self):
        assert not stability_margin(10.0).stable

    def test_margin_and_ratio_agree(self):
        for c in (0.1, 0.4, 0.7, 2.0):
            rep = stability_margin(c)
            assert rep.ratio is not None
            assert (rep.margin >= 0.0) == (rep.ratio >= 1.0)

    def test_prefix_structure_coarse(self):
        margins = [stability_margin(c).margin for c in np.linspace(0.0, 10.0, 41)]
        signs = np.sign(margins)
        assert np.count_nonzero(signs[:-1] != signs[1:]) == 1

    def test_optional_quotient_field(self):
        rep = stability_margin(0.2, with_steklov=True, steklov_R=8.0, steklov_grid=(65, 33))
        assert rep.steklov_lambda is not None
        assert rep.steklov_lambda > rep.ratio
        d = rep.to_dict()
        assert set(d) >= {"c", "phi0", "H1", "margin", "stable", "ratio", "steklov_lambda"}


class TestCriticalSlope:
    def test_bisection_anchor(self):
        c0 = find_critical_c0((0.0, 10.0), 1e-6)
        assert abs(c0 - C0_ANCHOR) < 2e-6

    def test_bracket_independence(self):
        a = find_critical_c0((0.0, 10.0), 1e-5)
        b = find_critical_c0((a - 0.1, a + 0.1), 1e-5)
        assert abs(a - b) <= 2e-5

    def test_margin_signs_straddle_the_root(self):
        c0 = find_critical_c0((0.3, 1.0), 1e-5)
        assert stability_margin(c0 - 1e-3).margin > 0.0
        assert stability_margin(c0 + 1e-3).margin < 0.0

    def test_record_collects_reports(self):
        record = []
        find_critical_c0((0.0, 2.0), 1e-2, record=record)
        assert len(record) >= 8
        assert all(hasattr(r, "margin") for r in record)

    def test_invalid_bracket(self):
        with pytest.raises(InvalidBracketError):
            find_critical_c0((2.0, 10.0), 1e-3)  # both unstable
        with pytest.raises(InvalidParameterError):
            find_critical_c0((1.0, 0.5), 1e-3)


class TestRadialWitness:
    def test_zero_function(self):
        lhs, rhs = radial_instability_witness(0.3, lambda r: np.zeros_like(np.asarray(r, dtype=float)))
        assert lhs == 0.0 and rhs == 0.0

    def test_surface_integral_exact_form(self):
        # direct quadrature equals 2 pi |t0| int F^2: the c-dependence is
        # exactly the |t0| factor
        F = SmoothBump(0.2, 0.9)
        r = np.linspace(0.0, 1.0, 4097)
        int_f2 = simpson_uniform(F(r) ** 2, r[1] - r[0])
        from conefbp.ode import symmetric_solution

        for c in (0.1, 0.5, 1.0, 2.0):
            sol = symmetric_solution(c, step=1e-3)
            lhs, _ = radial_instability_witness(c, F)
            assert abs(lhs - 2.0 * math.pi * abs(sol.t0) * int_f2) < 1e-8 * max(lhs, 1e-3)

    def test_normalized_surface_integral_is_slope_invariant(self):
        F = SmoothBump(0.2, 0.9)
        from conefbp.ode import symmetric_solution

        vals = []
        for c in (0.1, 0.5, 1.0, 2.0):
            sol = symmetric_solution(c, step=1e-3)
            lhs, _ = radial_instability_witness(c, F)
            vals.append(lhs / abs(sol.t0))
        assert max(vals) - min(vals) <= 1e-8 * max(vals)

    def test_bulk_decays_and_crosses(self):
        F = SmoothBump(0.2, 0.9)
        ratios = []
        rhs_vals = []
        for c in (1.0, 2.0, 4.0, 8.0):
            lhs, rhs = radial_instability_witness(c, F)
            rhs_vals.append(rhs)
            ratios.append(rhs / lhs)
        assert all(b < a for a, b in zip(rhs_vals, rhs_vals[1:]))
        assert ratios[-1] < 1.0  # witnesses instability, upper-bounds c0

    def test_support_validation(self):
        with pytest.raises(InvalidTestFunctionError):
            radial_instability_witness(0.3, lambda r: np.ones_like(np.asarray(r, dtype=float)))


class TestSecondVariationDeficit:
    @staticmethod
    def _bump2d(rng=None, seed=0):
        rad = SmoothBump(0.3, 0.8)

        def F(r, phi):
            return rad(r) * (1.0 + 0.5 * np.cos(phi))

        return F

    def test_flat_cone_nonnegative(self):
        d = second_variation_deficit(0.0, self._bump2d(), (0.3, 0.8))
        assert d >= -1e-12

    def test_small_slope_random_tests(self, rng):
        rad = SmoothBump(0.3, 0.8)
        for _ in range(12):
            a, b, w = rng.uniform(-1.0, 1.0, 3)

            def F(r, phi, a=a, b=b, w=w):
                return rad(r) * (1.0 + 0.4 * (a * np.cos(phi) + b * np.sin(w + phi)))

            assert second_variation_deficit(0.05, F, (0.3, 0.8), num_r=301, num_phi=151) >= -1e-8

    def test_large_slope_radial_witness_is_negative(self):
        rad = SmoothBump(0.3, 0.8)

        def F(r, phi):
            return rad(r) * np.ones_like(phi)

        assert second_variation_deficit(8.0, F, (0.3, 0.8)) < 0.0

    def test_support_checked(self):
        def bad(r, phi):
            return np.ones_like(r)

        with pytest.raises(InvalidTestFunctionError):
            second_variation_deficit(0.1, bad, (0.3, 0.8))


class TestSteklov:
    def test_matches_closed_form_structure(self):
        # small grids for speed: the minimum sits above the closed form
        # (end truncation) and decreases as the annulus widens
        closed = stability_margin(0.2).ratio
        lam8 = steklov_min_quotient(0.2, 8.0, num_r=97, num_phi=49)
        lam16 = steklov_min_quotient(0.2, 16.0, num_r=97, num_phi=49)
        assert lam8 > lam16 > closed

    def test_free_power_law_trial_attains_closed_form(self):
        # the radial fluxes of the separated power-law profile cancel, so
        # its free quotient equals the closed form at any annulus; this
        # pins both the discrete assembly and the closed form
        from conefbp.ode import beta_half_profile

        closed = stability_margin(0.2).ratio
        g = beta_half_profile(0.2, step=1e-3)

        def trial(rho, phi):
            vals = g.sample(np.clip(phi.ravel(), 1e-6, None))[0].reshape(phi.shape)
            return np.exp(-0.5 * rho) * vals

        for R in (8.0, 32.0):
            q = steklov_trial_quotient(0.2, R, trial, clamp_ends=False)
            assert abs(q / closed - 1.0) < 1e-4

    def test_trial_function_upper_bounds_minimum(self):
        lam = steklov_min_quotient(0.2, 8.0, num_r=97, num_phi=49)

        def trial(rho, phi):
            width = rho.max() - rho.min()
            ramp = np.minimum(1.0, 5.0 * np.minimum(rho - rho.min(), rho.max() - rho) / width)
            return ramp * np.exp(0.2 * np.cos(phi))

        q = steklov_trial_quotient(0.2, 8.0, trial, num_r=97, num_phi=49)
        assert q >= lam - 1e-9

    def test_requires_positive_curvature(self):
        with pytest.raises(InvalidParameterError):
            steklov_min_quotient(0.0, 8.0)
        with pytest.raises(InvalidParameterError):
            steklov_min_quotient(0.2, 2.0)


class TestConnectivityBound:
    def test_flat_cone(self):
        rep = connectivity_bound_check(0.0)
        assert abs(rep.total_turning) < 1e-7
        assert rep.holds and rep.chain_holds

    def test_small_slope(self):
        rep = connectivity_bound_check(0.1)
        assert rep.total_turning > 0.0
        assert rep.holds and rep.chain_holds

    def test_two_components_contradict(self):
        rep = connectivity_bound_check(0.1)
        # with two complement caps the chain bound drops to zero while the
        # left side stays positive
        assert rep.two_component_contradiction
        assert rep.chain_lhs > 0.0
