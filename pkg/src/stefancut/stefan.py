"""Phase-change coupling and the global time loop.

Conventions: phi < 0 solid, phi > 0 liquid; the interface normal speed
v_pc is measured along the solid-to-liquid direction, so v_pc > 0 means
the solid grows. With g_S, g_L the interface-normal derivatives of each
phase's temperature taken *into* that phase (what the embedded gradient
returns), the jump condition reads

    v_pc = -St (lambda_ratio * g_L + g_S)

which reduces to the classical balance: heat conducted away from the
front releases latent heat. The interface temperature follows the
curvature/kinetics relation T = T_m - eps_k(theta) kappa - eps_v v with
the velocity lagged by one step.
"""

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels, levelset as lsmod
from .cutcell import (LIQUID, SOLID, CutGeometry, PhaseProblem, VMIN,
                      build_gradient_op, compute_geometry, diffuse_implicit)
from .errors import NoConvergence, TimestepViolation
from .grid import NG, ScalarField, pad_validity
from .levelset import LevelSet


@dataclass(frozen=True)
class AnisotropyModel:
    """Directional surface-energy coefficient eps_k(theta)."""

    kind: str = "isotropic"          # isotropic | sixfold | fourfold
    base: float = 0.0
    strength: float = 0.0

    @classmethod
    def isotropic(cls, base):
        return cls("isotropic", base, 0.0)

    @classmethod
    def sixfold(cls, base=0.001, strength=0.4):
        return cls("sixfold", base, strength)

    @classmethod
    def fourfold(cls, base=0.5, strength=0.05):
        return cls("fourfold", base, strength)

    def epsilon_kappa(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if self.kind == "isotropic":
            return np.full_like(theta, self.base)
        if self.kind == "sixfold":
            mod = (8.0 / 3.0) * np.sin(3.0 * (theta - 0.5 * np.pi)) ** 4 - 1.0
            return self.base * (1.0 + self.strength * mod)
        if self.kind == "fourfold":
            return self.base * (1.0 - 15.0 * self.strength * np.cos(4.0 * theta))
        raise ValueError(f"unknown anisotropy kind {self.kind!r}")


def interface_temperature(kappa, vpc_prev, model: AnisotropyModel, theta_n,
                          eps_v=0.0, t_melt=0.0):
    """T_m - eps_k(theta) kappa - eps_v v, with the lagged normal speed."""
    ek = model.epsilon_kappa(theta_n)
    return t_melt - ek * np.asarray(kappa) - eps_v * np.asarray(vpc_prev)


@dataclass
class InterfaceState:
    """Per-interfacial-cell interface data for one step."""

    ii: np.ndarray
    jj: np.ndarray
    kappa: np.ndarray
    vpc_prev: np.ndarray
    theta: np.ndarray
    t_gamma: np.ndarray          # values at the listed cells

    def as_grid_array(self, n):
        out = np.zeros((n, n))
        out[self.ii, self.jj] = self.t_gamma
        return out


def evaluate_interface_state(ls: LevelSet, geom_solid: CutGeometry,
                             v_prev: ScalarField, model: AnisotropyModel,
                             eps_v, t_melt=0.0) -> InterfaceState:
    """Curvature and lagged speed sampled at the interface centroids, and
    the resulting Dirichlet interface temperature."""
    g = ls.grid
    ii, jj = geom_solid.interface_cells()
    xg = geom_solid.centroid_x[ii, jj]
    yg = geom_solid.centroid_y[ii, jj]

    kap, _ = lsmod.curvature(ls)
    kf = ScalarField(g)
    kf.interior = kap
    kf.apply_bc()
    kappa_g, _ = kernels.biquad_batch(kf.data, xg, yg, g.origin[0],
                                      g.origin[1], g.dx, g.n, g.n)
    vprev_g, _ = kernels.biquad_batch(v_prev.apply_bc().data, xg, yg,
                                      g.origin[0], g.origin[1], g.dx, g.n, g.n)
    # normal out of the solid = solid-to-liquid direction
    theta = np.arctan2(geom_solid.normal_y[ii, jj], geom_solid.normal_x[ii, jj])
    tg = interface_temperature(kappa_g, vprev_g, model, theta, eps_v, t_melt)
    return InterfaceState(ii, jj, kappa_g, vprev_g, theta, tg)


def stefan_velocity(solid: PhaseProblem, liquid: PhaseProblem, st,
                    lambda_ratio=1.0):
    """Normal interface speed (solid-to-liquid positive) per interfacial
    cell of the solid geometry; also returns the downgrade diagnostics."""
    ii, jj = solid.geom.interface_cells()
    op_s = build_gradient_op(solid, cells=(ii, jj))
    op_l = build_gradient_op(liquid, cells=(ii, jj))
    g_s = op_s.evaluate(solid.field.interior, solid.t_gamma)
    g_l = op_l.evaluate(liquid.field.interior, liquid.t_gamma)
    v = -st * (lambda_ratio * g_l + g_s)
    counts = {k: op_s.counts[k] + op_l.counts[k] for k in op_s.counts}
    return v, counts


def extend_velocity(ls: LevelSet, v_gamma, geom: CutGeometry, band=None,
                    sub_iterations=4, cfl=0.3, tol=1e-8, max_outer=100):
    """Propagate centroid speeds off the interface, constant along normals.

    Interfacial cells seed their centroid value; transport sweeps push it
    outward along sign(phi) n; after each block of sweeps the interfacial
    cell values are nudged so that biquadratic interpolation at the
    centroids reproduces v_gamma. Returns (ScalarField, info).
    """
    g = ls.grid
    n, dx = g.n, g.dx
    ii, jj = geom.interface_cells()
    vmax = float(np.max(np.abs(v_gamma))) if len(np.atleast_1d(v_gamma)) else 0.0

    vf = ScalarField(g)
    if ii.size == 0 or vmax == 0.0:
        if ii.size:
            vf.interior[ii, jj] = v_gamma
        vf.apply_bc()
        return vf, {"outer": 0, "residual": 0.0}

    vf.interior[ii, jj] = v_gamma
    vf.apply_bc()

    nx, ny, _ = lsmod.normal(ls)
    sgn = np.sign(ls.values)
    wx = sgn * nx
    wy = sgn * ny
    wxf = ScalarField(g)
    wxf.interior = wx
    wyf = ScalarField(g)
    wyf.interior = wy
    wx_pad = wxf.apply_bc().data
    wy_pad = wyf.apply_bc().data

    if band is None:
        band = 8.0 * dx
    iface = geom.interfacial
    upd = (np.abs(ls.values) <= band) & ~iface
    ui, uj = np.nonzero(upd)
    ui = ui.astype(np.int64)
    uj = uj.astype(np.int64)

    xg = geom.centroid_x[ii, jj]
    yg = geom.centroid_y[ii, jj]
    dtau = cfl * dx
    residual = np.inf
    for outer in range(1, max_outer + 1):
        for _ in range(sub_iterations):
            if ui.size:
                r = kernels.extend_rhs(vf.data, wx_pad, wy_pad, ui, uj, dx)
                vf.interior[ui, uj] += dtau * r
            vf.apply_bc()
        vals, wc = kernels.biquad_batch(vf.data, xg, yg, g.origin[0],
                                        g.origin[1], dx, n, n)
        eps = vals - v_gamma
        residual = float(np.max(np.abs(eps)))
        if residual <= tol * vmax:
            return vf, {"outer": outer, "residual": residual}
        vf.interior[ii, jj] -= eps / wc
        vf.apply_bc()
    warnings.warn(f"velocity extension stalled at residual {residual:.2e}",
                  RuntimeWarning)
    vf.residual = residual
    return vf, {"outer": max_outer, "residual": residual,
                "warning": NoConvergence("extension correction stalled",
                                         residual=residual)}


def tag_emerging(g_prev: CutGeometry, g_now: CutGeometry):
    """Cells that became interfacial this step: previously fully covered or
    fully uncovered (with the VMIN threshold), now strictly cut."""
    was_full_or_empty = (g_prev.vol <= VMIN) | (g_prev.vol >= 1.0 - VMIN)
    now_cut = (g_now.vol > VMIN) & (g_now.vol < 1.0 - VMIN)
    return was_full_or_empty & now_cut


def check_flips(g_prev: CutGeometry, g_now: CutGeometry):
    """Raise if any cell jumped covered <-> uncovered within one step."""
    a = (g_prev.vol <= VMIN) & (g_now.vol >= 1.0 - VMIN)
    b = (g_prev.vol >= 1.0 - VMIN) & (g_now.vol <= VMIN)
    bad = int(np.count_nonzero(a | b))
    if bad:
        raise TimestepViolation(
            f"{bad} cells flipped covered<->uncovered in one step")


def _transverse_sample(fpad, vpad, kx_axis, col, jt, eta, n):
    """Masked 1-D sample transverse to the dominant normal axis.

    col: index along the dominant axis, jt: containing transverse index,
    eta: offset from its centre in cells. Quadratic over {jt-1, jt, jt+1}
    when all three are valid, else the straddling linear pair, else the
    single containing cell when the offset is negligible.
    """

    def cell(q):
        return (col + NG, jt + q + NG) if kx_axis else (jt + q + NG, col + NG)

    if col < -1 or col > n:
        return 0.0, False
    if jt < 0 or jt > n - 1:
        ok3 = False
    else:
        ok3 = all(vpad[cell(q)] for q in (-1, 0, 1))
    if ok3:
        w = (0.5 * eta * (eta - 1.0), 1.0 - eta * eta, 0.5 * eta * (eta + 1.0))
        return sum(w[q + 1] * fpad[cell(q)] for q in (-1, 0, 1)), True
    lo = 0 if eta >= 0 else -1
    pair = (lo, lo + 1)
    if all(vpad[cell(q)] for q in pair):
        a = abs(eta)
        w = {lo: 1.0 - a, lo + 1: a} if eta >= 0 else {lo: a, lo + 1: 1.0 - a}
        return sum(w[q] * fpad[cell(q)] for q in pair), True
    if abs(eta) <= 1e-12 and vpad[cell(0)]:
        return fpad[cell(0)], True
    return 0.0, False


def init_emerging(problem: PhaseProblem, cells, state_tg=None):
    """Initialise the field in newly cut cells of one phase.

    Same construction as the interface gradient: cast the inward normal
    line from the interface centroid, sample the existing field where it
    crosses the first two cell-centre lines of the dominant direction
    (transverse interpolation masked to defined cells), fit a quadratic
    through (0, T_Gamma) and the two samples, and evaluate it at the
    projection of the cell centre onto the line. Falls back to the linear
    fit, then to T_Gamma alone; fallbacks are counted.

    cells: bool mask of cells to initialise. state_tg: (n, n) interface
    temperatures (defaults to problem.t_gamma). Mutates problem.field and
    returns the fallback counters.
    """
    geom = problem.geom
    g = geom.grid
    n, dx = g.n, g.dx
    tg_grid = problem.t_gamma if state_tg is None else state_tg
    counts = {"quadratic": 0, "linear": 0, "constant": 0}
    ci, cj = np.nonzero(cells)
    if ci.size == 0:
        return counts

    # valid sample cells: defined before this batch came to life
    valid = geom.active & ~cells
    vpad = pad_validity(valid, problem.field)

    iface = geom.interfacial
    fld = problem.field
    fld.apply_bc()
    fpad = fld.data

    vals = np.full(ci.size, np.nan)
    for k in range(ci.size):
        i, j = int(ci[k]), int(cj[k])
        tg = float(tg_grid[i, j])
        xo = g.origin[0] + (i + 0.5) * dx
        yo = g.origin[1] + (j + 0.5) * dx
        if not iface[i, j]:
            # degenerate cut with no usable segment: smooth-neighbour fill
            v, ok = kernels.biquad_batch_masked(
                fpad, vpad, np.array([xo]), np.array([yo]),
                g.origin[0], g.origin[1], dx, n, n)
            vals[k] = v[0] if ok[0] else tg
            counts["constant"] += 1
            continue
        mx = -geom.normal_x[i, j]
        my = -geom.normal_y[i, j]
        xg = geom.centroid_x[i, j]
        yg = geom.centroid_y[i, j]
        kx_axis = abs(mx) >= abs(my)
        mk = mx if kx_axis else my
        mt = my if kx_axis else mx
        pk = xg if kx_axis else yg
        pt = yg if kx_axis else xg
        ik = i if kx_axis else j
        o_k = g.origin[0] if kx_axis else g.origin[1]
        o_t = g.origin[1] if kx_axis else g.origin[0]
        sgn = 1.0 if mk >= 0 else -1.0

        samples = []
        for o in (1, 2):
            line = o_k + (ik + 0.5) * dx + sgn * o * dx
            t = (line - pk) / mk
            c_t = pt + t * mt
            jt = int(np.floor((c_t - o_t) / dx))
            eta = (c_t - o_t) / dx - jt - 0.5
            col = ik + int(sgn) * o
            v, ok = _transverse_sample(fpad, vpad, kx_axis, col, jt, eta, n)
            samples.append((t, v, ok))

        s = (xo - xg) * mx + (yo - yg) * my
        (d1, v1, ok1), (d2, v2, ok2) = samples
        if ok1 and ok2:
            # Lagrange quadratic through (0, tg), (d1, v1), (d2, v2)
            vals[k] = (tg * (s - d1) * (s - d2) / (d1 * d2)
                       + v1 * s * (s - d2) / (d1 * (d1 - d2))
                       + v2 * s * (s - d1) / (d2 * (d2 - d1)))
            counts["quadratic"] += 1
        elif ok1:
            vals[k] = tg + (v1 - tg) * s / d1
            counts["linear"] += 1
        else:
            vals[k] = tg
            counts["constant"] += 1
    fld.interior[ci, cj] = vals
    fld.apply_bc()
    return counts


def compute_timestep(v_field, dx, cfl=0.5, cap=None):
    """cfl * dx / max|v| (guarded), additionally capped by the scenario."""
    if isinstance(v_field, ScalarField):
        vmax = float(np.max(np.abs(v_field.interior)))
    else:
        vmax = float(np.max(np.abs(v_field))) if np.size(v_field) else 0.0
    dt = cfl * dx / max(vmax, 1e-30)
    if cap is not None:
        dt = min(dt, cap)
    return dt


@dataclass
class Simulation:
    """Two-phase Stefan solver state: level set, per-phase temperatures,
    cut geometries, and the lagged extension speed."""

    ls: LevelSet
    t_solid: ScalarField
    t_liquid: ScalarField
    st: float = 1.0
    lambda_ratio: float = 1.0
    diffusivity_liquid: float = 1.0
    diffusivity_solid: float = 1.0
    t_melt: float = 0.0
    eps_v: float = 0.0
    anisotropy: AnisotropyModel = dc_field(
        default_factory=lambda: AnisotropyModel.isotropic(0.0))
    cfl: float = 0.5
    dt_cap: float = None           # scenario-prescribed cap, may be callable(dx)
    solver_tol: float = 1e-8
    solver_method: str = "bicgstab"
    solver_coupling: str = "matrix"
    bc_updater: object = None      # callable(sim, t): refresh Dirichlet walls
    time: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        self.geom_solid = compute_geometry(self.ls, SOLID)
        self.geom_liquid = self.geom_solid.complement()
        self.v_ext = ScalarField(self.ls.grid)
        self._mask_covered()
        self.diagnostics = []

    @property
    def grid(self):
        return self.ls.grid

    def _mask_covered(self):
        self.t_solid.interior[~self.geom_solid.active] = np.nan
        self.t_liquid.interior[~self.geom_liquid.active] = np.nan
        self.t_solid.apply_bc()
        self.t_liquid.apply_bc()

    def phase_problems(self, t_gamma_grid):
        solid = PhaseProblem(self.geom_solid, self.t_solid,
                             self.diffusivity_solid, t_gamma_grid)
        liquid = PhaseProblem(self.geom_liquid, self.t_liquid,
                              self.diffusivity_liquid, t_gamma_grid)
        return solid, liquid

    def interface_speed(self):
        """Steps 1-2 of the loop: centroid speeds and the extended field."""
        state = evaluate_interface_state(self.ls, self.geom_solid, self.v_ext,
                                         self.anisotropy, self.eps_v,
                                         self.t_melt)
        tg_grid = state.as_grid_array(self.grid.n)
        solid, liquid = self.phase_problems(tg_grid)
        if self.st == 0.0:
            v_gamma = np.zeros(state.ii.size)
            counts = {}
        else:
            v_gamma, counts = stefan_velocity(solid, liquid, self.st,
                                              self.lambda_ratio)
        v_ext, ext_info = extend_velocity(self.ls, v_gamma, self.geom_solid)
        return state, v_gamma, v_ext, counts, ext_info

    def step(self, dt=None, dt_max=None):
        """Advance one step; returns the per-step diagnostics record."""
        g = self.grid
        dx = g.dx

        state, v_gamma, v_ext, grad_counts, ext_info = self.interface_speed()

        cap = self.dt_cap(dx) if callable(self.dt_cap) else self.dt_cap
        if dt is None:
            dt = compute_timestep(v_ext, dx, self.cfl, cap)
        if dt_max is not None:
            dt = min(dt, dt_max)

        its, dtau, band = lsmod.default_redistance_schedule(dx)
        new_ls = lsmod.advect(self.ls, v_ext, dt, band=band)
        gs_prev, gl_prev = self.geom_solid, self.geom_liquid
        gs_now = compute_geometry(new_ls, SOLID)
        gl_now = gs_now.complement()
        check_flips(gs_prev, gs_now)

        new_ls = lsmod.redistance(new_ls, its, dtau, band=band)

        self.ls = new_ls
        self.geom_solid, self.geom_liquid = gs_now, gl_now

        # interface data of the moved front; extension speed stays lagged
        state_new = evaluate_interface_state(new_ls, gs_now, v_ext,
                                             self.anisotropy, self.eps_v,
                                             self.t_melt)
        tg_grid = state_new.as_grid_array(g.n)

        emerging = {}
        for name, gprev, gnow, fld in (
                ("solid", gs_prev, gs_now, self.t_solid),
                ("liquid", gl_prev, gl_now, self.t_liquid)):
            tags = tag_emerging(gprev, gnow)
            born = tags & (gprev.vol <= VMIN)   # undefined before
            prob = PhaseProblem(gnow, fld,
                                self.diffusivity_solid if name == "solid"
                                else self.diffusivity_liquid, tg_grid)
            emerging[name] = init_emerging(prob, born, tg_grid)
            emerging[name]["tagged"] = int(np.count_nonzero(tags))
        self._mask_covered()

        if self.bc_updater is not None:
            self.bc_updater(self, self.time + dt)

        solid, liquid = self.phase_problems(tg_grid)
        self.t_solid, info_s = diffuse_implicit(
            solid, dt, tol=self.solver_tol, method=self.solver_method,
            coupling=self.solver_coupling)
        self.t_liquid, info_l = diffuse_implicit(
            liquid, dt, tol=self.solver_tol, method=self.solver_method,
            coupling=self.solver_coupling)

        # heat flowing from the interface into each phase at the new time
        # level (the implicit solve balances exactly against these)
        solid_new, liquid_new = self.phase_problems(tg_grid)
        q_iface = {}
        for name, prob in (("solid", solid_new), ("liquid", liquid_new)):
            op = build_gradient_op(prob)
            gvals = op.evaluate(prob.field.interior, prob.t_gamma)
            a_g = prob.geom.alpha_g[op.ii, op.jj]
            q_iface[name] = float(-prob.diffusivity
                                  * np.sum(a_g * gvals) * dx)

        self.v_ext = v_ext
        self.time += dt
        self.step_index += 1

        rec = {
            "step": self.step_index,
            "time": self.time,
            "dt": dt,
            "interface_length": float(np.sum(
                self.geom_solid.alpha_g[self.geom_solid.interfacial]) * dx),
            "vol_solid": float(np.sum(self.geom_solid.vol) * dx * dx),
            "vol_liquid": float(np.sum(self.geom_liquid.vol) * dx * dx),
            "max_v": float(np.max(np.abs(v_gamma))) if v_gamma.size else 0.0,
            "gradient_downgrades": grad_counts,
            "extension": ext_info,
            "solver_solid": info_s,
            "solver_liquid": info_l,
            "emerging": emerging,
            "saddles": self.geom_solid.saddle_count,
            "interface_heat": q_iface,
            "kappa_max": float(np.max(state_new.kappa))
            if state_new.kappa.size else 0.0,
        }
        self.diagnostics.append(rec)
        return rec
