"""Grid calculus: stencils, Laplace-Beltrami, bilaplacian and tensor identities."""

import math

import numpy as np
import pytest

from lambda_biharmonic.ambient import AmbientSpace
from lambda_biharmonic.calculus import (
    ChartGrid,
    GridGeometry,
    ScalarField,
    StencilBoundaryError,
    bilaplacian,
    codazzi_field,
    codazzi_residual,
    covariant_derivative_T,
    grad,
    laplace_beltrami,
    laplacian_field,
    nabla_T_field,
    partials,
)
from lambda_biharmonic.catalog import random_graph, slice_entry, spherical_vertical_cylinder

from conftest import grid_for


def flat_geometry(n=21, m=2, w=0.5):
    imm = slice_entry(AmbientSpace(0, m), half_width=w).immersion
    grid = ChartGrid.regular((-w,) * m, (w,) * m, n)
    return GridGeometry.build(imm, grid), grid


def sphere_height(grid):
    """Third embedding coordinate of the unit sphere through the chart (-1 at the origin)."""
    x = grid.points()
    r2 = np.sum(x**2, axis=-1)
    return -(1.0 - r2 / 4.0) / (1.0 + r2 / 4.0)


def sphere_geometry(n):
    imm = slice_entry(AmbientSpace(1, 2)).immersion
    grid = ChartGrid.regular((-0.5, -0.5), (0.5, 0.5), n)
    return GridGeometry.build(imm, grid), grid


class TestChartGrid:
    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            ChartGrid.regular((0, 0), (1, 1), 8)

    def test_margin_floor(self):
        with pytest.raises(ValueError):
            ChartGrid.regular((0, 0), (1, 1), 9, margin=1)

    def test_coarsened_lattice_is_subset(self):
        g = ChartGrid.regular((0, 0), (1, 2), 41)
        c = g.coarsened()
        np.testing.assert_allclose(c.points(), g.points()[::2, ::2])
        assert g.refined().n == (81, 81)

    def test_field_must_be_finite(self):
        g = ChartGrid.regular((0, 0), (1, 1), 9)
        vals = np.zeros(g.shape)
        vals[3, 3] = np.nan
        with pytest.raises(ValueError):
            ScalarField(g, vals)


class TestFlatStencils:
    def test_polynomials_up_to_degree_four(self):
        geom, grid = flat_geometry()
        x, y = np.moveaxis(grid.points(), -1, 0)
        f = ScalarField(grid, x**4 + 2 * x**2 * y**2 - y**3 + x * y + 3.0)
        lap = laplacian_field(f, geom)
        xi, yi = np.moveaxis(lap.grid.points(), -1, 0)
        exact = 12 * xi**2 + 4 * yi**2 + 4 * xi**2 - 6 * yi
        np.testing.assert_allclose(lap.values, exact, atol=1e-12)
        d = partials(f.values, grid)
        np.testing.assert_allclose(d[..., 0], 4 * xi**3 + 4 * xi * yi**2 + yi, atol=1e-12)

    def test_constant_and_linear(self):
        geom, grid = flat_geometry()
        idx = (10, 10)
        const = ScalarField(grid, np.full(grid.shape, 2.5))
        assert laplace_beltrami(const, idx, geom) == 0.0
        np.testing.assert_array_equal(grad(const, idx, geom), 0.0)
        lin = ScalarField(grid, grid.points()[..., 0])
        np.testing.assert_allclose(grad(lin, idx, geom), [1.0, 0.0], atol=1e-13)
        assert laplace_beltrami(lin, idx, geom) == pytest.approx(0.0, abs=1e-12)

    def test_bilaplacian_of_quadratic(self):
        geom, grid = flat_geometry()
        f = ScalarField(grid, np.sum(grid.points() ** 2, axis=-1))
        assert bilaplacian(f, (10, 10), geom) == pytest.approx(0.0, abs=1e-10)
        assert bilaplacian(ScalarField(grid, np.ones(grid.shape)), (10, 10), geom) == 0.0

    def test_boundary_violation(self):
        geom, grid = flat_geometry()
        f = ScalarField(grid, np.ones(grid.shape))
        with pytest.raises(StencilBoundaryError):
            laplace_beltrami(f, (1, 10), geom)
        with pytest.raises(StencilBoundaryError):
            bilaplacian(f, (3, 10), geom)


class TestCurvedLaplacian:
    def test_sphere_eigenfunction(self):
        geom, grid = sphere_geometry(81)
        f = ScalarField(grid, sphere_height(grid))
        assert f.values[40, 40] == -1.0
        assert laplace_beltrami(f, (40, 40), geom) == pytest.approx(2.0, abs=1e-7)
        assert bilaplacian(f, (40, 40), geom) == pytest.approx(-4.0, rel=1e-3)

    def test_fourth_order_convergence(self):
        errs = []
        for n in (21, 41):
            geom, grid = sphere_geometry(n)
            f = ScalarField(grid, sphere_height(grid))
            lap = laplacian_field(f, geom)
            errs.append(np.max(np.abs(lap.values + 2.0 * f.crop(2).values)))
        assert errs[0] / errs[1] >= 8.0

    def test_gradient_against_exact_and_richardson(self):
        space = AmbientSpace(1, 2)
        imm = random_graph(space, 4).immersion
        centre = 0.5 * (np.asarray(imm.lo) + np.asarray(imm.hi))
        vals = []
        for n, idx in ((21, (10, 10)), (41, (20, 20))):
            grid = ChartGrid.regular(imm.lo, imm.hi, n)
            geom = GridGeometry.build(imm, grid)
            x, y = np.moveaxis(grid.points(), -1, 0)
            f = ScalarField(grid, np.sin(2 * x) * np.cos(y) + x * y)
            vals.append(grad(f, idx, geom))
            g_inv = geom.frame.g_inv[idx]
        cx, cy = centre
        df = np.array([2 * math.cos(2 * cx) * math.cos(cy) + cy, -math.sin(2 * cx) * math.sin(cy) + cx])
        exact = g_inv @ df
        richardson = (16 * vals[1] - vals[0]) / 15
        np.testing.assert_allclose(vals[1], exact, atol=1e-8)
        np.testing.assert_allclose(richardson, exact, atol=1e-10)


class TestTangentialField:
    def test_slice(self):
        imm = slice_entry(AmbientSpace(1, 2)).immersion
        geom = GridGeometry.build(imm, ChartGrid.regular(imm.lo, imm.hi, 21))
        np.testing.assert_array_equal(covariant_derivative_T(geom, (10, 10), [1.0, 0.0]), 0.0)

    def test_vertical_cylinder(self):
        imm = spherical_vertical_cylinder(2, math.pi / 3).immersion
        geom = GridGeometry.build(imm, grid_for(imm, 41))
        for d in ([1.0, 0.0], [0.0, 1.0]):
            np.testing.assert_allclose(covariant_derivative_T(geom, (20, 20), d), 0.0, atol=1e-8)

    def test_random_graph_identity(self):
        imm = random_graph(AmbientSpace(-1, 2), 3).immersion
        geom = GridGeometry.build(imm, grid_for(imm, 81))
        nT = nabla_T_field(geom)
        fr = geom.crop(2).frame
        rhs = fr.theta[..., None, None] * np.swapaxes(fr.A, -1, -2)
        np.testing.assert_allclose(nT[2:-2, 2:-2], rhs[2:-2, 2:-2], atol=1e-6)

    def test_angle_derivative_identity(self):
        """X(cos alpha) = -<AX, T>."""
        imm = random_graph(AmbientSpace(1, 3), 8).immersion
        geom = GridGeometry.build(imm, grid_for(imm, 41))
        dth = partials(geom.frame.theta, geom.grid)
        fr = geom.crop(2).frame
        AT = np.einsum("...kj,...j->...k", fr.b, fr.T)
        np.testing.assert_allclose(dth, -AT, atol=1e-6)


class TestCodazzi:
    def test_slice(self):
        imm = slice_entry(AmbientSpace(1, 2)).immersion
        geom = GridGeometry.build(imm, ChartGrid.regular(imm.lo, imm.hi, 21))
        assert np.max(np.abs(codazzi_field(geom))) == 0.0

    def test_flat_graph(self):
        imm = random_graph(AmbientSpace(0, 2), 1).immersion
        geom = GridGeometry.build(imm, grid_for(imm, 81))
        anti, amb = codazzi_field(geom, parts=True)
        assert not np.any(amb)
        assert np.max(np.abs(anti)) <= 1e-6

    def test_spherical_graph(self):
        imm = random_graph(AmbientSpace(1, 2), 1).immersion
        geom = GridGeometry.build(imm, grid_for(imm, 81))
        anti, amb = codazzi_field(geom, parts=True)
        assert np.max(np.abs(amb)) > 1e-3  # the ambient term is genuinely active
        assert np.max(np.abs(anti - amb)) <= 1e-5
        assert codazzi_residual(geom, (40, 40), 0, 1, 1) <= 1e-5
