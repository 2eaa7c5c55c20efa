import math

import numpy as np
import pytest

from stefancut import cutcell, levelset
from stefancut.cutcell import (LIQUID, SOLID, PhaseProblem, VMIN,
                               build_gradient_op, compute_geometry,
                               diffuse_implicit, embedded_gradient,
                               fv_divergence)
from stefancut.errors import MissingFlux
from stefancut.grid import Grid, ScalarField
from stefancut.levelset import LevelSet


def make_ls(n, fn, origin=(0.0, 0.0), side=1.0):
    return LevelSet.from_function(Grid(n, origin, side), fn)


class TestGeometry:
    def test_axis_aligned_cut_through_centers(self):
        # vertical cut through the centres of column i = 1 on n = 4
        n = 4
        ls = make_ls(n, lambda x, y: x - 0.375)
        gl = compute_geometry(ls, LIQUID)
        assert np.allclose(gl.vol[0, :], 0.0)
        assert np.allclose(gl.vol[1, :], 0.5)
        assert np.allclose(gl.vol[2:, :], 1.0)
        # vertical faces snap to 0/1, horizontal faces of the cut column 0.5
        assert np.allclose(gl.face_x[1, :], 0.0)
        assert np.allclose(gl.face_x[2, :], 1.0)
        assert np.allclose(gl.face_y[1, :], 0.5)
        assert np.allclose(gl.normal_x[1, :], -1.0)
        assert np.allclose(gl.normal_y[1, :], 0.0)
        assert np.allclose(gl.alpha_g[1, :], 1.0)
        assert np.allclose(gl.centroid_x[1, :], 0.375)

    def test_diagonal_cut_through_corners(self):
        # 45-degree line through the NW/SE corners of interior cell (2, 3):
        # V = 0.5, alpha_g = sqrt(2)
        n = 8
        s = math.sqrt(2.0)
        ls = make_ls(n, lambda x, y: (x + y - 0.75) / s)
        gl = compute_geometry(ls, LIQUID)
        assert gl.vol[2, 3] == pytest.approx(0.5, abs=1e-13)
        assert gl.alpha_g[2, 3] == pytest.approx(s, abs=1e-13)
        nrm = (gl.normal_x[2, 3], gl.normal_y[2, 3])
        assert nrm[0] == pytest.approx(-s / 2, abs=1e-13)
        assert nrm[1] == pytest.approx(-s / 2, abs=1e-13)

    def test_circle_area(self):
        n = 64
        r = 0.3
        ls = make_ls(n, lambda x, y: np.hypot(x - 0.5, y - 0.5) - r)
        gs = compute_geometry(ls, SOLID)
        area = np.sum(gs.vol) * ls.grid.dx ** 2
        assert area == pytest.approx(math.pi * r * r, rel=2e-3)

    def test_complementarity(self):
        n = 32
        ls = make_ls(n, lambda x, y: np.hypot(x - 0.47, y - 0.53) - 0.22)
        gl = compute_geometry(ls, LIQUID)
        gs = compute_geometry(ls, SOLID)
        assert np.max(np.abs(gl.vol + gs.vol - 1.0)) <= 1e-13
        assert np.max(np.abs(gl.face_x + gs.face_x - 1.0)) <= 1e-13
        assert np.max(np.abs(gl.face_y + gs.face_y - 1.0)) <= 1e-13
        ii, jj = gl.interface_cells()
        assert np.array_equal(np.column_stack(gs.interface_cells()),
                              np.column_stack((ii, jj)))
        assert np.allclose(gl.normal_x[ii, jj], -gs.normal_x[ii, jj])
        assert np.allclose(gl.centroid_x[ii, jj], gs.centroid_x[ii, jj])

    def test_closure_constant_field(self):
        # discrete divergence of a constant vector field vanishes per cell
        n = 48
        ls = make_ls(n, lambda x, y: np.hypot(x - 0.5, y - 0.5) - 0.27)
        for phase in (LIQUID, SOLID):
            g = compute_geometry(ls, phase)
            ii, jj = g.interface_cells()
            fx_c, fy_c = 1.7, -0.9
            closure = (g.face_x[1:, :] - g.face_x[:-1, :]) * fx_c \
                + (g.face_y[:, 1:] - g.face_y[:, :-1]) * fy_c \
                + g.alpha_g * (g.normal_x * fx_c + g.normal_y * fy_c)
            assert np.max(np.abs(closure[ii, jj])) <= 1e-12


class TestDivergence:
    def test_constant_flux_zero_divergence(self):
        n = 32
        ls = make_ls(n, lambda x, y: np.hypot(x - 0.5, y - 0.5) - 0.25)
        g = compute_geometry(ls, SOLID)
        fx = np.full((n + 1, n), 1.0)
        fy = np.zeros((n, n + 1))
        ii, jj = g.interface_cells()
        ifl = g.normal_x * 1.0 + g.normal_y * 0.0
        div = fv_divergence(g, fx, fy, ifl)
        assert np.max(np.abs(div)) <= 1e-12

    def test_linear_flux_divergence(self):
        # F = (x, y) on full cells gives divergence exactly 2
        n = 16
        grid = Grid(n)
        ls = make_ls(n, lambda x, y: np.full_like(x, 1.0))  # all liquid
        g = compute_geometry(ls, LIQUID)
        xf = grid.vertex_coords_1d(0)
        yc = grid.cell_centers_1d(1)
        fx = np.repeat(xf[:, None], n, axis=1)
        fy = np.repeat(grid.vertex_coords_1d(1)[None, :], n, axis=0)
        div = fv_divergence(g, fx, fy, np.zeros((n, n)))
        assert np.allclose(div, 2.0, atol=1e-12)

    def test_telescoping_global_sum(self):
        n = 40
        ls = make_ls(n, lambda x, y: np.hypot(x - 0.5, y - 0.5) - 0.3)
        g = compute_geometry(ls, SOLID)
        rng = np.random.default_rng(11)
        fx = rng.standard_normal((n + 1, n))
        fy = rng.standard_normal((n, n + 1))
        ifl = rng.standard_normal((n, n))
        div = fv_divergence(g, fx, fy, ifl)
        total = np.sum(div * g.vol * ls.grid.dx)
        iface = g.interfacial
        expect = np.sum(g.alpha_g[iface] * ifl[iface])
        assert total == pytest.approx(expect, rel=1e-12, abs=1e-12)

    def test_missing_flux(self):
        n = 16
        ls = make_ls(n, lambda x, y: np.hypot(x - 0.5, y - 0.5) - 0.3)
        g = compute_geometry(ls, SOLID)
        fx = np.full((n + 1, n), np.nan)
        with pytest.raises(MissingFlux):
            fv_divergence(g, fx, np.zeros((n, n + 1)), np.zeros((n, n)))


def planar_liquid_problem(n=32, xcut=0.4093, field_fn=None, t_gamma_fn=None):
    ls = make_ls(n, lambda x, y: x - xcut)
    g = compute_geometry(ls, LIQUID)
    fld = ScalarField(ls.grid)
    xc, yc = ls.grid.cell_centers()
    if field_fn is not None:
        fld.interior = field_fn(xc, yc)
    fld.apply_bc()
    tg = np.zeros((n, n))
    if t_gamma_fn is not None:
        ii, jj = g.interface_cells()
        tg[ii, jj] = t_gamma_fn(g.centroid_x[ii, jj], g.centroid_y[ii, jj])
    return PhaseProblem(g, fld, 1.0, tg)


class TestEmbeddedGradient:
    def test_linear_exact(self):
        # a = 1 + 2 (m . (x - xg)) with m the inward normal; a_G = 1
        n = 32
        ls = make_ls(n, lambda x, y: np.hypot(x - 0.47, y - 0.51) - 0.23)
        g = compute_geometry(ls, LIQUID)
        ii, jj = g.interface_cells()
        fld = ScalarField(ls.grid)
        xc, yc = ls.grid.cell_centers()
        for k in range(0, ii.size, 5):
            i, j = ii[k], jj[k]
            mx, my = -g.normal_x[i, j], -g.normal_y[i, j]
            xg, yg = g.centroid_x[i, j], g.centroid_y[i, j]
            fld.interior = 1.0 + 2.0 * (mx * (xc - xg) + my * (yc - yg))
            fld.apply_bc()
            tg = np.zeros((n, n))
            tg[i, j] = 1.0
            p = PhaseProblem(g, fld, 1.0, tg)
            assert embedded_gradient(p, (i, j)) == pytest.approx(2.0, abs=1e-10)

    def test_quadratic_exact(self):
        n = 32
        ls = make_ls(n, lambda x, y: np.hypot(x - 0.47, y - 0.51) - 0.23)
        g = compute_geometry(ls, LIQUID)
        ii, jj = g.interface_cells()
        fld = ScalarField(ls.grid)
        xc, yc = ls.grid.cell_centers()
        for k in range(0, ii.size, 7):
            i, j = ii[k], jj[k]
            mx, my = -g.normal_x[i, j], -g.normal_y[i, j]
            xg, yg = g.centroid_x[i, j], g.centroid_y[i, j]
            fld.interior = (mx * (xc - xg) + my * (yc - yg)) ** 2
            fld.apply_bc()
            p = PhaseProblem(g, fld, 1.0, np.zeros((n, n)))
            assert embedded_gradient(p, (i, j)) == pytest.approx(0.0, abs=1e-10)

    def test_downgrade_counters_present(self):
        n = 16
        ls = make_ls(n, lambda x, y: np.hypot(x - 0.5, y - 0.5) - 0.3)
        g = compute_geometry(ls, LIQUID)
        p = PhaseProblem(g, ScalarField(ls.grid).apply_bc(), 1.0,
                         np.zeros((n, n)))
        op = build_gradient_op(p)
        total = sum(op.counts.values())
        assert total == op.ii.size


class TestDiffuseImplicit:
    def test_constant_steady_no_interface(self):
        n = 24
        ls = make_ls(n, lambda x, y: np.full_like(x, 1.0))
        g = compute_geometry(ls, LIQUID)
        fld = ScalarField(ls.grid)
        fld.interior = 4.25
        fld.apply_bc()
        p = PhaseProblem(g, fld, 1.0, np.zeros((n, n)))
        out, info = diffuse_implicit(p, dt=1e-3)
        assert np.max(np.abs(out.interior - 4.25)) <= 1e-12

    def test_fourier_decay_periodic(self):
        n = 128
        grid = Grid(n)
        ls = make_ls(n, lambda x, y: np.full_like(x, 1.0))
        g = compute_geometry(ls, LIQUID)
        bc = {s: ("periodic",) for s in ("xlo", "xhi", "ylo", "yhi")}
        fld = ScalarField(grid)
        fld.bc.update(bc)
        xc, _ = grid.cell_centers()
        fld.interior = np.sin(2 * np.pi * xc)
        fld.apply_bc()
        p = PhaseProblem(g, fld, 1.0, np.zeros((n, n)))
        dt = 0.01
        out, _ = diffuse_implicit(p, dt=dt, tol=1e-10)
        basis = np.sin(2 * np.pi * xc)
        amp = np.sum(out.interior * basis) / np.sum(basis * basis)
        expect = 1.0 / (1.0 + 4.0 * np.pi ** 2 * dt)
        assert amp == pytest.approx(expect, rel=1e-2)

    def test_mass_conserved_neumann(self):
        n = 32
        ls = make_ls(n, lambda x, y: np.full_like(x, 1.0))
        g = compute_geometry(ls, LIQUID)
        fld = ScalarField(ls.grid)
        rng = np.random.default_rng(5)
        fld.interior = rng.random((n, n))
        fld.apply_bc()
        before = np.sum(fld.interior)
        p = PhaseProblem(g, fld, 1.0, np.zeros((n, n)))
        out, _ = diffuse_implicit(p, dt=5e-3, tol=1e-12)
        assert np.sum(out.interior) == pytest.approx(before, rel=1e-10)

    def test_linear_steady_with_interface(self):
        # liquid right of a planar cut, T = x - xcut, interface value 0,
        # consistent Dirichlet at the right wall: a steady state
        n = 32
        xcut = 0.4093
        p = planar_liquid_problem(n, xcut, field_fn=lambda x, y: x - xcut)
        p.field.bc["xhi"] = ("dirichlet", 1.0 - xcut)
        p.field.apply_bc()
        out, info = diffuse_implicit(p, dt=2e-3, tol=1e-11)
        act = p.geom.active
        err = np.abs(out.interior - p.field.interior)
        assert np.max(err[act]) <= 1e-8

    def test_matrix_vs_lagged_coupling(self):
        n = 32
        xcut = 0.437
        p = planar_liquid_problem(
            n, xcut, field_fn=lambda x, y: (x - xcut) ** 2 + 0.3 * y)
        p.field.bc["xhi"] = ("dirichlet", lambda y: (1 - xcut) ** 2 + 0.3 * y)
        p.field.apply_bc()
        out_m, _ = diffuse_implicit(p, dt=1e-3, tol=1e-10, coupling="matrix")
        out_l, _ = diffuse_implicit(p, dt=1e-3, tol=1e-10, coupling="lagged")
        act = p.geom.active
        diff = np.abs(out_m.interior - out_l.interior)
        assert np.max(diff[act]) <= 1e-8

    def test_jacobi_matches_bicgstab(self):
        n = 16
        p = planar_liquid_problem(n, 0.41,
                                  field_fn=lambda x, y: np.cos(3 * x) + y)
        out_b, _ = diffuse_implicit(p, dt=1e-3, tol=1e-11, method="bicgstab")
        out_j, _ = diffuse_implicit(p, dt=1e-3, tol=1e-11, method="jacobi")
        act = p.geom.active
        assert np.max(np.abs(out_b.interior - out_j.interior)[act]) <= 1e-8
