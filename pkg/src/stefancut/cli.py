"""Batch front end: config files, runs, sweeps, and CSV/manifest output.

Config files are INI-style `key = value` lines under the section headers
[scenario], [physics], [numerics], [output]; unknown keys are rejected
with the offending line number. Exit codes: 0 success, 2 parse error,
3 validation error, 4 runtime failure.
"""

import argparse
import hashlib
import json
import sys
import time
from dataclasses import fields as dc_fields
from pathlib import Path

import numpy as np

from . import __version__, harness
from .errors import ParseError, StefanCutError, ValidationError
from .harness import CaseConfig, convergence_sweep, make_config, run_case
from .levelset import interface_crossings

_SECTION_KEYS = {
    "scenario": {"scenario"},
    "physics": {"stefan_number", "lambda_ratio", "diffusivity_ratio",
                "melting_temperature", "epsilon_kappa", "epsilon_v",
                "anisotropy", "anisotropy_strength", "far_temperature",
                "front_velocity", "crank_lambda", "interface_kind",
                "interface_position", "interface_radius"},
    "numerics": {"n", "origin_x", "origin_y", "side", "initial_time",
                 "dt_rule", "dt_value", "cfl", "end_time", "max_steps",
                 "solver_tolerance", "solver_method", "solver_coupling"},
    "output": {"output_cadence"},
}
_KEY_SECTION = {k: s for s, ks in _SECTION_KEYS.items() for k in ks}

_STR_KEYS = {"scenario", "anisotropy", "dt_rule", "solver_method",
             "solver_coupling", "interface_kind"}
_INT_KEYS = {"n", "max_steps", "output_cadence"}


def parse_config(text) -> CaseConfig:
    """Parse a config file body into a validated CaseConfig."""
    section = None
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("[") and body.endswith("]"):
            name = body[1:-1].strip().lower()
            if name not in _SECTION_KEYS:
                raise ParseError(lineno, f"unknown section [{name}]")
            section = name
            continue
        if "=" not in body:
            raise ParseError(lineno, "expected 'key = value'")
        key, _, val = body.partition("=")
        key = key.strip().lower()
        val = val.strip()
        if key not in _KEY_SECTION:
            raise ParseError(lineno, f"unknown key {key!r}")
        if section is not None and key not in _SECTION_KEYS[section]:
            raise ParseError(lineno, f"key {key!r} not valid in [{section}]")
        if key in raw:
            raise ParseError(lineno, f"duplicate key {key!r}")
        if key in _STR_KEYS:
            raw[key] = val
        elif key in _INT_KEYS:
            try:
                raw[key] = int(val)
            except ValueError:
                raise ParseError(lineno, f"expected integer for {key!r}")
        else:
            try:
                raw[key] = float(val)
            except ValueError:
                raise ParseError(lineno, f"expected number for {key!r}")
    if "scenario" not in raw:
        raise ParseError(0, "missing required key 'scenario'")
    scenario = raw.pop("scenario")
    if scenario not in harness.SCENARIOS:
        raise ValidationError(f"unknown scenario {scenario!r}")
    return make_config(scenario, **raw)


def serialize_config(cfg: CaseConfig) -> str:
    """Canonical text form; parse(serialize(parse(x))) is a fixed point."""
    lines = ["[scenario]", f"scenario = {cfg.scenario}"]
    for section in ("physics", "numerics", "output"):
        lines.append(f"[{section}]")
        for key in sorted(_SECTION_KEYS[section]):
            val = getattr(cfg, key)
            if isinstance(val, float):
                val = repr(val)
            lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: CaseConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


def _fmt(x):
    return f"{x:.17g}"


def write_interface_csv(path, t, segments):
    """One cut segment per line: t,x0,y0,x1,y1 (17 significant digits)."""
    with open(path, "w") as fh:
        fh.write("t,x0,y0,x1,y1\n")
        for (x0, y0, x1, y1) in segments:
            fh.write(",".join(_fmt(v) for v in (t, x0, y0, x1, y1)) + "\n")


def interface_segments(sim):
    """Per-cell interface segments from the cut geometry (world coords)."""
    geom = sim.geom_solid
    g = sim.grid
    dx = g.dx
    ii, jj = geom.interface_cells()
    segs = []
    for i, j in zip(ii, jj):
        cx = geom.centroid_x[i, j]
        cy = geom.centroid_y[i, j]
        # reconstruct endpoints from centroid, tangent and length
        tx, ty = -geom.normal_y[i, j], geom.normal_x[i, j]
        half = 0.5 * geom.alpha_g[i, j] * dx
        segs.append((cx - half * tx, cy - half * ty,
                     cx + half * tx, cy + half * ty))
    return segs


def write_field_csv(path, sim, name):
    """Row-major values with covered cells as nan."""
    if name == "phi":
        vals = sim.ls.values
    elif name == "t_solid":
        vals = np.where(sim.geom_solid.active, sim.t_solid.interior, np.nan)
    elif name == "t_liquid":
        vals = np.where(sim.geom_liquid.active, sim.t_liquid.interior, np.nan)
    else:
        raise ValueError(f"unknown field {name!r}")
    g = sim.grid
    with open(path, "w") as fh:
        fh.write(f"# n={g.n} origin={_fmt(g.origin[0])},{_fmt(g.origin[1])} "
                 f"dx={_fmt(g.dx)}\n")
        for j in range(g.n):
            fh.write(",".join(_fmt(v) for v in vals[:, j]) + "\n")


def read_field_csv(path):
    with open(path) as fh:
        header = fh.readline()
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    arr = np.array(rows).T
    return header, arr


def write_timeseries_csv(path, rows):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r.get(c, float("nan"))) for c in cols)
                     + "\n")


def write_convergence_csv(path, report):
    with open(path, "w") as fh:
        fh.write("grid,dt,L1,order_L1,Linf,order_Linf\n")
        for row in report.rows():
            fh.write(",".join([str(row["grid"]), _fmt(row["dt"]),
                               _fmt(row["L1"]), _fmt(row["order_L1"]),
                               _fmt(row["Linf"]), _fmt(row["order_Linf"])])
                     + "\n")


def write_plot_script(path, files):
    """gnuplot script referencing only the emitted CSVs."""
    lines = ["set datafile separator ','", "set size ratio -1"]
    iface = [f for f in files if f.startswith("interface_")]
    if iface:
        plots = ", ".join(
            f"'{f}' using 2:3:($4-$2):($5-$3) with vectors nohead notitle"
            for f in sorted(iface))
        lines += ["set title 'interface'", f"plot {plots}", "pause -1"]
    if "timeseries.csv" in files:
        lines += ["set size noratio", "set title 'diagnostics'",
                  "plot 'timeseries.csv' using 1:2 with lines title "
                  "columnheader(2)", "pause -1"]
    if "convergence.csv" in files:
        lines += ["set logscale xy", "set title 'convergence'",
                  "plot 'convergence.csv' using 1:3 with linespoints "
                  "title 'L1', 'convergence.csv' using 1:5 with "
                  "linespoints title 'Linf'", "pause -1"]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_outputs(result, out_dir, config_path=None, extra_files=()):
    """Write interface/field/timeseries CSVs, plot script, and manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = list(extra_files)
    sim = result.sim

    seg_path = f"interface_{sim.step_index:06d}.csv"
    write_interface_csv(out / seg_path, sim.time, interface_segments(sim))
    files.append(seg_path)

    for name in ("phi", "t_solid", "t_liquid"):
        p = f"field_{name}_{sim.step_index:06d}.csv"
        write_field_csv(out / p, sim, name)
        files.append(p)

    rows = result.measures.get("rows", [])
    write_timeseries_csv(out / "timeseries.csv", rows)
    files.append("timeseries.csv")

    write_plot_script(out / "plots.gnuplot", files)
    files.append("plots.gnuplot")

    manifest = {
        "config_path": str(config_path) if config_path else None,
        "config_hash": config_hash(result.config),
        "config": serialize_config(result.config),
        "code_version": __version__,
        "wall_time_s": result.runtime,
        "steps": sim.step_index,
        "final_time": sim.time,
        "l1_error": None if np.isnan(result.l1_error) else result.l1_error,
        "linf_error": None if np.isnan(result.linf_error)
        else result.linf_error,
        "diagnostics_last": sim.diagnostics[-1] if getattr(
            sim, "diagnostics", None) else None,
        "output_files": files,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=repr)
    return files


def cmd_run(args):
    cfg = parse_config(Path(args.config).read_text())
    result = run_case(cfg, progress=args.verbose)
    emit_outputs(result, args.out, config_path=args.config)
    print(f"run complete: {result.sim.step_index} steps to "
          f"t={result.sim.time:.6g} in {result.runtime:.1f}s "
          f"(L1={result.l1_error:.3e}, Linf={result.linf_error:.3e})")
    return 0


def cmd_sweep(args):
    cfg = parse_config(Path(args.config).read_text())
    grids = [int(g) for g in args.grids.split(",")]
    report = convergence_sweep(cfg, grids)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_convergence_csv(out / "convergence.csv", report)
    write_plot_script(out / "plots.gnuplot", ["convergence.csv"])
    for row in report.rows():
        print(f"  {row['grid']:4d}^2  L1={row['L1']:.3e} "
              f"(order {row['order_L1']:.2f})  Linf={row['Linf']:.3e} "
              f"(order {row['order_Linf']:.2f})")
    return 0


def cmd_verify(args):
    from . import acceptance

    results = acceptance.run_profile(args.profile, verbose=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "acceptance.json", "w") as fh:
        json.dump([r.as_dict() for r in results], fh, indent=2, default=repr)
    failed = [r for r in results if not r.passed]
    return 4 if failed else 0


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="stefancut",
        description="2-D phase-change solver on a level-set cut-cell grid")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--seed", type=int, default=0,
                       help="reserved (the solver is deterministic)")
    p_run.add_argument("--verbose", action="store_true")
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid refinement sweep")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--grids", default="32,64,128,256")
    p_sweep.add_argument("--out", default="out")
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_ver = sub.add_parser("verify",
                           help="run the acceptance profile (PASS/FAIL)")
    p_ver.add_argument("--profile", choices=("quick", "full", "long"),
                       default="quick")
    p_ver.add_argument("--out", default="out")
    p_ver.set_defaults(fn=cmd_verify)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as e:
        print(f"config parse error: {e}", file=sys.stderr)
        return 2
    except ValidationError as e:
        print(f"config invalid: {e}", file=sys.stderr)
        return 3
    except StefanCutError as e:
        print(f"run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
