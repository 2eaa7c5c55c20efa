"""Scenario definitions, case driver, error norms, and convergence sweeps.

Every verification case is fully described by a CaseConfig; the builders
here turn one into a ready-to-run Simulation plus (where one exists) the
closed-form reference used for error norms.
"""

import math
import os
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, fields as dc_fields, replace

import numpy as np

from . import analytic, levelset as lsmod
from .cutcell import SOLID, VMIN, compute_geometry
from .errors import EmptyInterface, ValidationError
from .grid import Grid, ScalarField
from .kernels import biquad_batch
from .levelset import LevelSet, interface_crossings
from .stefan import AnisotropyModel, Simulation, compute_timestep, extend_velocity

SCENARIOS = ("planar_stefan", "crank_melting", "frank_spheres",
             "shrinking_circle", "crystal_fourfold", "crystal_sixfold",
             "tip_velocity")


@dataclass
class CaseConfig:
    """Reproducible description of one run (defaults per scenario below)."""

    scenario: str = "planar_stefan"
    n: int = 64
    origin_x: float = 0.0
    origin_y: float = 0.0
    side: float = 1.0
    stefan_number: float = 1.0
    lambda_ratio: float = 1.0
    diffusivity_ratio: float = 1.0
    melting_temperature: float = 0.0
    epsilon_kappa: float = 0.0
    epsilon_v: float = 0.0
    anisotropy: str = "isotropic"
    anisotropy_strength: float = 0.0
    interface_kind: str = "line"       # line | layer | circle | flower
    interface_position: float = 0.1
    interface_radius: float = 0.25
    front_velocity: float = 1.0
    crank_lambda: float = 0.9
    far_temperature: float = -0.5
    initial_time: float = 0.0
    dt_rule: str = "cfl"               # cfl | fixed | quadratic
    dt_value: float = 0.0
    cfl: float = 0.5
    end_time: float = 0.1
    max_steps: int = 0
    output_cadence: int = 0
    solver_tolerance: float = 1e-8
    solver_method: str = "bicgstab"
    solver_coupling: str = "matrix"

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ValidationError(f"unknown scenario {self.scenario!r}")
        if self.n < 8:
            raise ValidationError("n must be >= 8")
        if self.stefan_number < 0:
            raise ValidationError("stefan_number must be >= 0")
        if self.epsilon_kappa < 0 or self.epsilon_v < 0:
            raise ValidationError("epsilon_kappa and epsilon_v must be >= 0")
        if self.side <= 0:
            raise ValidationError("side must be positive")
        if self.dt_rule not in ("cfl", "fixed", "quadratic"):
            raise ValidationError(f"unknown dt_rule {self.dt_rule!r}")
        if self.dt_rule in ("fixed", "quadratic") and self.dt_value <= 0:
            raise ValidationError("dt_value must be positive for this rule")
        if not 0 < self.cfl <= 1:
            raise ValidationError("cfl must be in (0, 1]")
        if self.anisotropy not in ("isotropic", "sixfold", "fourfold"):
            raise ValidationError(f"unknown anisotropy {self.anisotropy!r}")
        return self

    @property
    def grid(self):
        return Grid(self.n, (self.origin_x, self.origin_y), self.side)

    def dt_cap(self):
        """Scenario-prescribed timestep cap, or None for pure CFL."""
        if self.dt_rule == "fixed":
            return self.dt_value
        if self.dt_rule == "quadratic":
            return lambda dx: self.dt_value * dx * dx
        return None


SCENARIO_DEFAULTS = {
    # travelling solidification front; quadratic-rule dts match the
    # reported refinement study (1.6e-3 at 32^2 down to 2.5e-5 at 256^2)
    "planar_stefan": dict(
        side=1.0, stefan_number=1.0, interface_kind="line",
        interface_position=0.1, front_velocity=1.0,
        dt_rule="quadratic", dt_value=1.6384, end_time=0.1),
    # melting layer heated from above, similarity solution with lam = 0.9
    "crank_melting": dict(
        side=1.0, stefan_number=2.85, interface_kind="layer",
        crank_lambda=0.9, initial_time=0.03,
        dt_rule="quadratic", dt_value=10.24, end_time=0.25),
    # self-similar disk growth into undercooled melt
    "frank_spheres": dict(
        origin_x=-4.0, origin_y=-4.0, side=8.0, stefan_number=1.0,
        interface_kind="circle", far_temperature=-0.5, initial_time=1.0,
        dt_rule="quadratic", dt_value=0.2, end_time=2.5),
    # curvature-driven shrinking circle (no thermal problem)
    "shrinking_circle": dict(
        n=128, origin_x=-0.5, origin_y=-0.5, side=1.0,
        interface_kind="circle", interface_radius=0.45,
        dt_rule="fixed", dt_value=4e-4, max_steps=180, end_time=1.0),
    # isotropic crystal growth from a flower seed; walls insulated
    "crystal_fourfold": dict(
        origin_x=-2.0, origin_y=-2.0, side=4.0, stefan_number=0.5,
        interface_kind="flower", far_temperature=-0.5,
        epsilon_kappa=2e-3, epsilon_v=2e-3, end_time=0.8),
    # sixfold anisotropic growth at undercooling 0.8
    "crystal_sixfold": dict(
        n=512, origin_x=-2.0, origin_y=-2.0, side=4.0, stefan_number=1.0,
        interface_kind="circle", interface_radius=0.25,
        far_temperature=-0.8, epsilon_kappa=1e-3, epsilon_v=1e-3,
        anisotropy="sixfold", anisotropy_strength=0.4, end_time=0.036),
    # fourfold kinetics-free tip-velocity case on a large domain
    "tip_velocity": dict(
        n=512, origin_x=-400.0, origin_y=-400.0, side=800.0,
        stefan_number=1.0, interface_kind="circle", interface_radius=25.0,
        far_temperature=-0.55, epsilon_kappa=0.5, epsilon_v=0.0,
        anisotropy="fourfold", anisotropy_strength=0.05, end_time=40000.0,
        output_cadence=5),
}


def make_config(scenario, **overrides) -> CaseConfig:
    base = dict(SCENARIO_DEFAULTS[scenario]) if scenario in SCENARIO_DEFAULTS \
        else {}
    base.update(overrides)
    return CaseConfig(scenario=scenario, **base).validate()


def snapped_front_position(cfg: CaseConfig):
    """Initial front coordinate snapped to a fixed in-cell fraction so the
    cut topology is identical across grid refinements."""
    g = cfg.grid
    return g.origin[0] + (round((cfg.interface_position - g.origin[0]) / g.dx)
                          + 0.37) * g.dx


def _anisotropy_model(cfg: CaseConfig):
    if cfg.anisotropy == "isotropic":
        return AnisotropyModel.isotropic(cfg.epsilon_kappa)
    if cfg.anisotropy == "sixfold":
        return AnisotropyModel.sixfold(cfg.epsilon_kappa,
                                       cfg.anisotropy_strength)
    return AnisotropyModel.fourfold(cfg.epsilon_kappa,
                                    cfg.anisotropy_strength)


def _masked_fields(grid, gs, solid_vals, liquid_vals):
    ts = ScalarField(grid)
    ts.interior = np.where(gs.active, solid_vals, np.nan)
    ts.apply_bc()
    tl = ScalarField(grid)
    tl.interior = np.where(gs.complement().active, liquid_vals, np.nan)
    tl.apply_bc()
    return ts, tl


def build_case(cfg: CaseConfig):
    """(Simulation, reference solution or None) for the configuration."""
    cfg.validate()
    grid = cfg.grid
    xc, yc = grid.cell_centers()
    model = _anisotropy_model(cfg)
    common = dict(st=cfg.stefan_number, lambda_ratio=cfg.lambda_ratio,
                  diffusivity_liquid=cfg.diffusivity_ratio,
                  diffusivity_solid=1.0, t_melt=cfg.melting_temperature,
                  eps_v=cfg.epsilon_v, anisotropy=model, cfl=cfg.cfl,
                  dt_cap=cfg.dt_cap(), solver_tol=cfg.solver_tolerance,
                  solver_method=cfg.solver_method,
                  solver_coupling=cfg.solver_coupling)

    if cfg.scenario == "planar_stefan":
        x0 = snapped_front_position(cfg)
        ref = analytic.PlanarStefan(cfg.front_velocity, x0)
        ls = LevelSet.from_function(grid, lambda x, y: x - x0)
        gs = compute_geometry(ls, SOLID)
        ts, tl = _masked_fields(grid, gs, 0.0,
                                ref.liquid_temperature(xc, yc, 0.0))
        ts.bc["xlo"] = ("dirichlet", 0.0)
        sim = Simulation(ls=ls, t_solid=ts, t_liquid=tl, **common)

        def walls(s, t):
            xhi = grid.origin[0] + grid.side
            s.t_liquid.bc["xhi"] = (
                "dirichlet",
                lambda c, t=t: ref.liquid_temperature(xhi, c, t))
        sim.bc_updater = walls
        walls(sim, 0.0)
        return sim, ref

    if cfg.scenario == "crank_melting":
        t0 = cfg.initial_time
        ref = analytic.CrankLayer(cfg.crank_lambda)
        y0 = ref.interface_position(t0)
        ls = LevelSet.from_function(grid, lambda x, y: y - y0)
        gs = compute_geometry(ls, SOLID)
        ts, tl = _masked_fields(grid, gs, 0.0,
                                ref.liquid_temperature(xc, yc, t0))
        ts.bc["ylo"] = ("dirichlet", 0.0)
        tl.bc["yhi"] = ("dirichlet", 1.0)
        sim = Simulation(ls=ls, t_solid=ts, t_liquid=tl, **common)
        sim.time = t0
        return sim, ref

    if cfg.scenario == "frank_spheres":
        t0 = cfg.initial_time
        ref = analytic.FrankSphere(cfg.far_temperature)
        r0 = ref.interface_position(t0)
        ls = LevelSet.from_function(grid, lambda x, y: np.hypot(x, y) - r0)
        ls = lsmod.redistance(ls, 40, 0.3 * grid.dx, band=12 * grid.dx)
        gs = compute_geometry(ls, SOLID)
        ts, tl = _masked_fields(grid, gs, 0.0,
                                ref.liquid_temperature(xc, yc, t0))
        sim = Simulation(ls=ls, t_solid=ts, t_liquid=tl, **common)
        sim.time = t0

        def walls(s, t):
            for side, sel in (("xlo", 0), ("xhi", 0), ("ylo", 1), ("yhi", 1)):
                lo = side.endswith("lo")
                coord = grid.origin[sel] + (0.0 if lo else grid.side)
                if side.startswith("x"):
                    fn = lambda c, t=t, w=coord: ref.liquid_temperature(w, c, t)
                else:
                    fn = lambda c, t=t, w=coord: ref.liquid_temperature(c, w, t)
                s.t_liquid.bc[side] = ("dirichlet", fn)
        sim.bc_updater = walls
        walls(sim, t0)
        return sim, ref

    if cfg.scenario == "shrinking_circle":
        r0 = cfg.interface_radius
        ls = LevelSet.from_function(grid, lambda x, y: np.hypot(x, y) - r0)
        ls = lsmod.redistance(ls, 40, 0.3 * grid.dx, band=12 * grid.dx)
        gs = compute_geometry(ls, SOLID)
        ts, tl = _masked_fields(grid, gs, 0.0, 0.0)
        sim = Simulation(ls=ls, t_solid=ts, t_liquid=tl, **common)
        return sim, analytic.CurvatureFlowCircle(r0)

    if cfg.scenario in ("crystal_fourfold", "crystal_sixfold",
                        "tip_velocity"):
        if cfg.interface_kind == "flower":
            def phi0(x, y):
                r2 = x * x + y * y
                th = np.arctan2(y, x)
                return np.sqrt(r2 * (1.0 - 0.3 * np.cos(4.0 * th))) \
                    - math.sqrt(1.0 / 15.0)
        else:
            r0 = cfg.interface_radius
            phi0 = lambda x, y: np.hypot(x, y) - r0
        ls = LevelSet.from_function(grid, phi0)
        ls = lsmod.redistance(ls, 60, 0.3 * grid.dx, band=14 * grid.dx)
        gs = compute_geometry(ls, SOLID)
        ts, tl = _masked_fields(grid, gs, 0.0, cfg.far_temperature)
        sim = Simulation(ls=ls, t_solid=ts, t_liquid=tl, **common)
        return sim, None

    raise ValidationError(f"unknown scenario {cfg.scenario!r}")


def temperature_errors(sim: Simulation, ref, t):
    """(L1, Linf) of the temperature against the reference at time t.

    Norms run over defined cells of both phases; L1 is weighted by the
    volume fractions (a volume-weighted mean over the domain).
    """
    xc, yc = sim.grid.cell_centers()
    num = 0.0
    den = 0.0
    linf = 0.0
    for fld, geom, branch in (
            (sim.t_solid, sim.geom_solid, "solid_temperature"),
            (sim.t_liquid, sim.geom_liquid, "liquid_temperature")):
        act = geom.active
        exact = getattr(ref, branch)(xc, yc, t)
        err = np.abs(fld.interior - exact)[act]
        w = geom.vol[act]
        num += float(np.sum(err * w))
        den += float(np.sum(w))
        if err.size:
            linf = max(linf, float(np.max(err)))
    return num / den, linf


def shrinking_circle_step(sim: Simulation, dt=None):
    """Curvature-flow step: v = -kappa at centroids, no thermal solve."""
    from . import kernels

    g = sim.grid
    gs = sim.geom_solid
    ii, jj = gs.interface_cells()
    kap, _ = lsmod.curvature(sim.ls)
    kf = ScalarField(g)
    kf.interior = kap
    kf.apply_bc()
    kg, _ = biquad_batch(kf.data, gs.centroid_x[ii, jj],
                         gs.centroid_y[ii, jj], g.origin[0], g.origin[1],
                         g.dx, g.n, g.n)
    v_gamma = -kg
    v_ext, _ = extend_velocity(sim.ls, v_gamma, gs)
    cap = sim.dt_cap(g.dx) if callable(sim.dt_cap) else sim.dt_cap
    if dt is None:
        dt = compute_timestep(v_ext, g.dx, sim.cfl, cap)
    its, dtau, band = lsmod.default_redistance_schedule(g.dx)
    sim.ls = lsmod.advect(sim.ls, v_ext, dt, band=band)
    sim.ls = lsmod.redistance(sim.ls, its, dtau, band=band)
    sim.geom_solid = compute_geometry(sim.ls, SOLID)
    sim.geom_liquid = sim.geom_solid.complement()
    sim.time += dt
    sim.step_index += 1
    return {"step": sim.step_index, "time": sim.time, "dt": dt,
            "max_v": float(np.max(np.abs(v_gamma)))}


def measure_interface(points, mode, center=(0.0, 0.0), sectors=6,
                      arm_offset=math.pi / 2):
    """Scalar diagnostics from a set of interface points.

    mean_radius / radius_stddev: statistics of |p - center|;
    max_x: largest x coordinate (its time series differentiates to the tip
    velocity); arm_lengths: per-sector maximum radius with sectors centred
    on arm_offset + k * 2 pi / sectors.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise EmptyInterface("no interface points")
    r = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])
    if mode == "mean_radius":
        return float(np.mean(r))
    if mode == "radius_stddev":
        return float(np.std(r))
    if mode == "max_x":
        return float(np.max(pts[:, 0]))
    if mode == "arm_lengths":
        ang = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
        width = 2.0 * math.pi / sectors
        out = np.zeros(sectors)
        for k in range(sectors):
            c = arm_offset + k * width
            d = np.angle(np.exp(1j * (ang - c)))
            sel = np.abs(d) <= width / 2
            out[k] = np.max(r[sel]) if np.any(sel) else 0.0
        return out
    raise ValueError(f"unknown measure mode {mode!r}")


def tip_velocity_series(times, tip_x):
    """Centred finite differences of the tip position time series."""
    times = np.asarray(times)
    tip_x = np.asarray(tip_x)
    if times.size < 3:
        raise ValueError("need at least 3 samples")
    v = np.gradient(tip_x, times)
    return v


_DEFAULT_MEASURES = {
    "planar_stefan": ("max_x",),
    "crank_melting": ("mean_radius",),
    "frank_spheres": ("mean_radius", "radius_stddev"),
    "shrinking_circle": ("mean_radius", "radius_stddev"),
    "crystal_fourfold": ("mean_radius", "radius_stddev"),
    "crystal_sixfold": ("mean_radius", "arm_span"),
    "tip_velocity": ("max_x",),
}


@dataclass
class CaseResult:
    config: CaseConfig
    sim: Simulation
    reference: object
    times: list = dc_field(default_factory=list)
    measures: dict = dc_field(default_factory=dict)
    snapshots: list = dc_field(default_factory=list)   # (step, time) emitted
    l1_error: float = float("nan")
    linf_error: float = float("nan")
    runtime: float = 0.0
    kappa_series: list = dc_field(default_factory=list)

    def measure_row(self, t):
        pts = interface_crossings(self.sim.ls)
        row = {"t": t}
        for mode in _DEFAULT_MEASURES.get(self.config.scenario, ()):
            if mode == "arm_span":
                arms = measure_interface(pts, "arm_lengths")
                row["arm_min"] = float(np.min(arms))
                row["arm_max"] = float(np.max(arms))
            else:
                row[mode] = measure_interface(pts, mode)
        return row


def run_case(cfg: CaseConfig, snapshot_hook=None, progress=False) -> CaseResult:
    """Run one configuration to its end time (or step budget).

    snapshot_hook(result, step_index) fires at the output cadence and at
    the final state; deterministic for a fixed config.
    """
    cfg.validate()
    start = _time.perf_counter()
    sim, ref = build_case(cfg)
    res = CaseResult(config=cfg, sim=sim, reference=ref)
    stepper = shrinking_circle_step if cfg.scenario == "shrinking_circle" \
        else lambda s, dt=None: s.step(dt_max=dt)

    def snap(rec=None):
        t = sim.time
        res.times.append(t)
        res.measures.setdefault("rows", []).append(res.measure_row(t))
        if snapshot_hook is not None:
            snapshot_hook(res, sim.step_index)

    snap()
    max_steps = cfg.max_steps or 10 ** 9
    while sim.step_index < max_steps and sim.time < cfg.end_time - 1e-14:
        remaining = cfg.end_time - sim.time
        if cfg.scenario == "shrinking_circle":
            rec = shrinking_circle_step(sim)
        else:
            rec = sim.step(dt_max=remaining)
            res.kappa_series.append((sim.time, rec["kappa_max"]))
        cadence = cfg.output_cadence
        if cadence and sim.step_index % cadence == 0:
            snap(rec)
        if progress and sim.step_index % 50 == 0:
            print(f"  [{cfg.scenario} n={cfg.n}] step {sim.step_index} "
                  f"t={sim.time:.5g} dt={rec['dt']:.3g}")
    snap()

    if ref is not None and cfg.scenario not in ("shrinking_circle",):
        res.l1_error, res.linf_error = temperature_errors(sim, ref, sim.time)
    res.runtime = _time.perf_counter() - start
    return res


@dataclass
class ErrorReport:
    """Per-grid errors and observed orders for a refinement sweep."""

    grids: list
    dts: list
    l1: list
    linf: list
    runtimes: list

    @staticmethod
    def orders(errs):
        out = [float("nan")]
        for a, b in zip(errs[:-1], errs[1:]):
            out.append(math.log2(a / b) if a > 0 and b > 0 else float("nan"))
        return out

    @property
    def l1_orders(self):
        return self.orders(self.l1)

    @property
    def linf_orders(self):
        return self.orders(self.linf)

    def rows(self):
        ol1 = self.l1_orders
        oli = self.linf_orders
        return [
            {"grid": g, "dt": d, "L1": e1, "order_L1": o1,
             "Linf": ei, "order_Linf": oi}
            for g, d, e1, o1, ei, oi in zip(
                self.grids, self.dts, self.l1, ol1, self.linf, oli)]


def sweep_workers():
    raw = os.environ.get("STEFAN_CUT_THREADS", "").strip()
    if raw:
        return max(1, int(raw))
    return 1


def convergence_sweep(cfg: CaseConfig, grids) -> ErrorReport:
    """Run the scenario at each grid with its dt rule; collect the errors."""
    configs = [replace(cfg, n=int(n)) for n in grids]

    def one(c):
        r = run_case(c)
        dt = r.sim.diagnostics[-1]["dt"] if getattr(r.sim, "diagnostics", None) \
            else float("nan")
        return r.l1_error, r.linf_error, dt, r.runtime

    workers = min(sweep_workers(), len(configs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(one, configs))
    else:
        out = [one(c) for c in configs]
    return ErrorReport(grids=list(grids),
                       dts=[o[2] for o in out],
                       l1=[o[0] for o in out],
                       linf=[o[1] for o in out],
                       runtimes=[o[3] for o in out])


def initial_gradient_errors(grids, scenario="planar_stefan"):
    """Mean |v - V| over interfacial cells of the initial planar front."""
    from .cutcell import PhaseProblem
    from .stefan import stefan_velocity

    errs = []
    for n in grids:
        cfg = make_config(scenario, n=int(n))
        sim, ref = build_case(cfg)
        tg = np.zeros((cfg.n, cfg.n))
        solid = PhaseProblem(sim.geom_solid, sim.t_solid, 1.0, tg)
        liquid = PhaseProblem(sim.geom_liquid, sim.t_liquid,
                              cfg.diffusivity_ratio, tg)
        v, _ = stefan_velocity(solid, liquid, cfg.stefan_number,
                               cfg.lambda_ratio)
        errs.append(float(np.mean(np.abs(v - cfg.front_velocity))))
    return errs
