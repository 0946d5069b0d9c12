import numpy as np
import pytest

from conefbp.errors import ConvergenceFailureError, GridMismatchError, InvalidParameterError
from conefbp.grid import (
    apply_laplace_beltrami,
    dirichlet_solve,
    field_from_solution,
    field_to_csv,
    gradient_c,
    gradient_sq_field,
    load_field_text,
    make_field,
    save_field_text,
)


class TestLaplaceBeltrami:
    def test_flat_harmonic_residual(self):
        f = make_field(64, 64, 0.0)
        f.values = np.outer(f.r, np.cos(f.phi))
        res = apply_laplace_beltrami(f)
        h = f.phi[1] - f.phi[0]
        # away from the vertex the residual is clean O(h^2); the 1/r^2
        # weights amplify it near the puncture
        away = f.r >= 0.2
        assert np.abs(res[away]).max() <= 5.0 * h * h
        assert np.abs(res).max() <= h * h / (2.0 * f.r_min)

    def test_quadratic_exact_value(self):
        f = make_field(48, 40, 0.7)
        f.values = np.outer(f.r**2, np.ones_like(f.phi))
        res = apply_laplace_beltrami(f)
        assert np.abs(res - 6.0 / 1.49).max() <= 1e-10

    def test_symmetric_solution_harmonic_inside(self, sol03):
        f = field_from_solution(sol03, 96, 96)
        res = apply_laplace_beltrami(f)
        h = f.phi[1] - f.phi[0]
        mask = np.zeros_like(f.values, dtype=bool)
        mask[1:-1, 1:-1] = True
        mask &= f.r[:, None] >= 0.2
        mask &= f.phi[None, :] < sol03.phi0 - 3.0 * h
        assert np.abs(res[mask]).max() <= 30.0 * h * h

    def test_linearity(self, rng):
        f = make_field(24, 24, 0.4)
        u = rng.random(f.shape)
        v = rng.random(f.shape)
        a, b = 1.7, -0.6
        fu, fv, fw = (f.with_values(x) for x in (u, v, a * u + b * v))
        lin = a * apply_laplace_beltrami(fu) + b * apply_laplace_beltrami(fv)
        direct = apply_laplace_beltrami(fw)
        scale = np.abs(direct).max()
        assert np.abs(lin - direct).max() <= 1e-12 * scale


class TestDirichletSolve:
    def test_constant_data_gives_constant(self):
        f = make_field(32, 32, 0.5)
        f.values[-1, :] = 1.0
        out = dirichlet_solve(f)
        assert np.abs(out.values - 1.0).max() <= 1e-8

    def test_maximum_principle(self, rng):
        f = make_field(24, 28, 0.3)
        data = 1.0 + rng.random(28)
        f.values[-1, :] = data
        out = dirichlet_solve(f)
        interior = out.values[:-1, :]
        assert interior.max() <= data.max() + 1e-8
        assert interior.min() >= data.min() - 1e-8

    def test_second_order_convergence(self):
        def solve_err(n):
            fld = make_field(n, n, 0.0, r_min=0.1)
            exact = np.outer(fld.r, np.cos(fld.phi)) + 1.5
            fld.dirichlet[0, :] = True
            fld.dirichlet[-1, :] = True
            fld.values = np.where(fld.dirichlet, exact, 1.0)
            return np.abs(dirichlet_solve(fld).values - exact).max()

        e1, e2 = solve_err(24), solve_err(48)
        assert e1 / e2 >= 3.5

    def test_nonconvergence_carries_log(self):
        f = make_field(24, 24, 0.0)
        f.values[-1, :] = 1.0 + np.sin(f.phi)
        with pytest.raises(ConvergenceFailureError) as err:
            dirichlet_solve(f, max_iter=3)
        assert err.value.log

    def test_dirichlet_nodes_untouched(self):
        f = make_field(24, 24, 0.2)
        f.values[-1, :] = 2.0
        out = dirichlet_solve(f)
        assert np.array_equal(out.values[-1, :], f.values[-1, :])

    def test_mask_shape_checked(self):
        f = make_field(16, 16, 0.0)
        with pytest.raises(GridMismatchError):
            dirichlet_solve(f, unknown=np.ones((4, 4), dtype=bool))


class TestGradient:
    def test_linear_radial_field(self):
        f = make_field(32, 32, 0.0)
        f.values = np.outer(f.r, np.ones_like(f.phi))
        gsq = gradient_sq_field(f)
        assert np.abs(gsq - 1.0).max() <= 1e-12

    def test_unit_gradient_near_free_boundary(self, sol03):
        f = field_from_solution(sol03, 128, 128)
        h = f.phi[1] - f.phi[0]
        j = int(np.searchsorted(f.phi, sol03.phi0)) - 2  # inside, stencil clear of kink
        i = 96
        val = gradient_c(f, i, j)
        assert abs(val - 1.0) <= 8.0 * h

    def test_pole_value_from_profile(self, sol03):
        f = field_from_solution(sol03, 96, 96)
        gsq = gradient_sq_field(f)
        f0 = sol03.profile_value(1e-9)
        expected = f0 * f0 / 1.09
        assert abs(gsq[48, 0] - expected) <= 5e-3

    def test_interior_only_flag(self):
        f = make_field(16, 16, 0.0)
        with pytest.raises(InvalidParameterError):
            gradient_c(f, 0, 3, interior_only=True)


class TestFieldValidation:
    def test_negative_values_rejected(self):
        with pytest.raises(InvalidParameterError):
            make_field(8, 8, 0.0, values=-np.ones((8, 8)))

    def test_tiny_grid_rejected(self):
        with pytest.raises(InvalidParameterError):
            make_field(2, 8, 0.0)

    def test_geometric_spacing(self):
        f = make_field(16, 8, 0.0, r_min=0.05, spacing="geometric")
        ratios = f.r[1:] / f.r[:-1]
        assert np.allclose(ratios, ratios[0])


class TestSerialization:
    def test_text_round_trip(self, tmp_path, sol03):
        f = field_from_solution(sol03, 24, 24)
        path = tmp_path / "field.txt"
        save_field_text(f, path)
        g = load_field_text(path)
        assert g.shape == f.shape
        assert np.array_equal(g.values, f.values)
        assert g.c == f.c
        assert g.r_min == f.r_min

    def test_csv_export(self, tmp_path, sol03):
        f = field_from_solution(sol03, 8, 8)
        path = tmp_path / "field.csv"
        field_to_csv(f, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "r,phi,value"
        assert len(lines) == 1 + 64
