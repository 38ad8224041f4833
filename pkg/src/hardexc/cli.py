"""Command-line front end: single runs, steady/stability queries, threshold
evaluation, sweeps, and figure-data regeneration.

All data files are deterministic (full-precision text); wall-clock timing and
timestamps are isolated in the metadata JSON so reruns overwrite data files
byte-identically.  Exit codes: 0 success, 2 configuration error, 3 numeric
failure, 4 sweep completed with unsettled/overflowed points.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys as _sysmod
import time

import numpy as np

from .config import ConfigError, RunConfig, load_config, load_config_file
from .eig import EigenSolverError
from .integrate import IntegratorConfig, RotatingRHS, StiffnessError, integrate, settle
from .model import Detunings, DriveParams, ModeState, ORIGIN, SystemParams
from .presets import PRESETS, preset
from .stability import StabilityReport, analyze, analyze_state, bistable_region, thresholds
from .steady import (FixedPoint, analytic_low_branch, newton_solve,
                     solve_corotating)
from .sweep import AxisSpec, SweepPlan, run_sweep, threshold_map
from . import __version__

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4


def _error_report(kind: str, message: str, **extra) -> None:
    doc = {"error": {"type": kind, "message": message, **extra}}
    print(json.dumps(doc, sort_keys=True), file=_sysmod.stderr)


def _warning_report(kind: str, message: str, **extra) -> None:
    doc = {"warning": {"type": kind, "message": message, **extra}}
    print(json.dumps(doc, sort_keys=True), file=_sysmod.stderr)


def _outdir(args, cfg: RunConfig, command: str) -> str:
    base = (args.out or os.environ.get("HARDEXC_OUT_DIR") or cfg.out_dir
            or "hardexc_out")
    path = os.path.join(base, command)
    os.makedirs(path, exist_ok=True)
    return path


def _write_metadata(path: str, cfg: RunConfig, command: str, t0: float,
                    **extra) -> None:
    doc = {
        "command": command,
        "engine_version": __version__,
        "parameters": cfg.resolved_metadata(),
        "generated_at_unix": time.time(),
        "wall_s": time.perf_counter() - t0,
        **extra,
    }
    with open(os.path.join(path, "metadata.json"), "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)


def _fp_doc(fp: FixedPoint) -> dict:
    s = fp.state
    i1, i2, ib = fp.intensities
    return {
        "branch": fp.branch, "converged": fp.converged,
        "residual_norm": fp.residual_norm, "nu_rad_per_s": fp.nu,
        "state": {"a1": [s.a1.real, s.a1.imag], "a2": [s.a2.real, s.a2.imag],
                  "b": [s.b.real, s.b.imag]},
        "intensities": {"I1": i1, "I2": i2, "Ib": ib},
    }


def _candidate_fixed_points(cfg: RunConfig):
    """Fixed points for the configured drive: the non-generating branch and
    the attractor reached from a kicked cold start."""
    sysp, det, drive = cfg.sys, cfg.det, cfg.drive
    out = []
    if drive.seed_amp == 0.0:
        out.append(("low", analytic_low_branch(sysp, det, drive)))
    else:
        guess = ModeState(0j, -1j * drive.seed_amp / cfg.sys.gamma2, 0j)
        out.append(("low", newton_solve(guess, sysp, det, drive)))
    cap = cfg.sweep_settle_cap / sysp.gamma_min
    rhs = RotatingRHS(sysp, det, drive)
    st, _ok = settle(rhs, ORIGIN, cfg.integrator, t_cap=cap)
    eps = cfg.simulate_kick_rel * max(st.norm(), 1.0)
    st, _ok = settle(rhs, ModeState(st.a1, st.a2 + eps, st.b + eps),
                     cfg.integrator, t_cap=cap)
    if drive.seed_amp == 0.0 and abs(st.b) > 0:
        dyn = solve_corotating(st, sysp, det, drive)
    else:
        dyn = newton_solve(st, sysp, det, drive)
    out.append(("settled", dyn))
    return out


def cmd_thresholds(args, cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    if cfg.thresholds is None:
        _error_report("config", "thresholds undefined: need positive decay "
                                "rates and nonzero coupling")
        return EXIT_CONFIG
    ts = cfg.thresholds
    region = bistable_region(cfg.sys, cfg.det)
    print(f"Omega_ex = {ts.omega_ex:.9e} 1/s")
    print(f"Omega_th = {ts.omega_th:.9e} 1/s")
    print(f"hard_mode = {ts.hard_mode}")
    print(f"bistable_region = {region}")
    out = _outdir(args, cfg, "thresholds")
    with open(os.path.join(out, "thresholds.json"), "w") as f:
        json.dump({"omega_ex_per_s": ts.omega_ex,
                   "omega_th_per_s": ts.omega_th,
                   "hard_mode": ts.hard_mode,
                   "bistable_region_per_s": region}, f, indent=1,
                  sort_keys=True)
    _write_metadata(out, cfg, "thresholds", t0)
    return EXIT_OK


def cmd_simulate(args, cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    sysp, det, drive = cfg.sys, cfg.det, cfg.drive
    if sysp.gamma_min <= 0:
        _error_report("config", "simulate needs positive decay rates")
        return EXIT_CONFIG
    rhs = RotatingRHS(sysp, det, drive)
    eps = cfg.simulate_kick_rel * 1.0
    init = ModeState(0j, eps + 0j, eps + 0j) if eps > 0 else ORIGIN
    t_end = cfg.simulate_t_end_over_gamma / sysp.gamma_min
    try:
        traj = integrate(rhs, init, t_end, cfg.integrator)
    except StiffnessError as e:
        _error_report("numeric", str(e))
        return EXIT_NUMERIC
    out = _outdir(args, cfg, "simulate")
    traj.to_csv(os.path.join(out, "trajectory.csv"))
    i1, i2, ib = traj.intensities[-1]
    _write_metadata(out, cfg, "simulate", t0, termination=traj.reason,
                    n_accepted=traj.n_accept, n_rejected=traj.n_reject,
                    final_time_s=traj.final_time,
                    final_intensities={"I1": i1, "I2": i2, "Ib": ib})
    if traj.reason == "overflow":
        _error_report("numeric", "trajectory overflowed |amplitude| > 1e30",
                      files=[os.path.join(out, "trajectory.csv")])
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_steady(args, cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    try:
        fps = _candidate_fixed_points(cfg)
    except StiffnessError as e:
        _error_report("numeric", str(e))
        return EXIT_NUMERIC
    out = _outdir(args, cfg, "steady")
    doc = {name: _fp_doc(fp) for name, fp in fps}
    with open(os.path.join(out, "steady.json"), "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
    _write_metadata(out, cfg, "steady", t0)
    if not any(fp.converged for _n, fp in fps):
        _error_report("numeric", "no fixed point converged")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_stability(args, cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    try:
        fps = _candidate_fixed_points(cfg)
    except StiffnessError as e:
        _error_report("numeric", str(e))
        return EXIT_NUMERIC
    out = _outdir(args, cfg, "stability")
    rows = []
    doc = {}
    try:
        for name, fp in fps:
            if not fp.converged:
                doc[name] = {"fixed_point": _fp_doc(fp), "analysis": None}
                continue
            rep = analyze(fp, cfg.sys, cfg.det)
            doc[name] = {
                "fixed_point": _fp_doc(fp),
                "analysis": {
                    "classification": rep.classification,
                    "stable": rep.stable, "marginal": rep.marginal,
                    "spectral_abscissa": rep.spectral_abscissa,
                    "eigenvalues": [[l.real, l.imag]
                                    for l in rep.eigenvalues],
                },
            }
            rows.append(rep.to_csv_row(cfg.drive.pump_amp,
                                       cfg.drive.seed_amp))
    except EigenSolverError as e:
        _error_report("numeric", str(e))
        return EXIT_NUMERIC
    with open(os.path.join(out, "stability.csv"), "w", newline="") as f:
        f.write(StabilityReport.csv_header() + "\n")
        for r in rows:
            f.write(r + "\n")
    with open(os.path.join(out, "stability.json"), "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
    _write_metadata(out, cfg, "stability", t0)
    if not rows:
        _error_report("numeric", "no converged fixed point to analyze")
        return EXIT_NUMERIC
    return EXIT_OK


def _run_sweep_files(args, cfg: RunConfig, command: str, plan: SweepPlan):
    t0 = time.perf_counter()
    res = run_sweep(plan, cfg.sys, cfg.det)
    out = _outdir(args, cfg, command)
    res.to_csv(os.path.join(out, f"{command}.csv"))
    res.to_json(os.path.join(out, f"{command}.json"))
    jumps = {
        "omega2_values": [float(v) for v in res.omega2],
        "jump_omega1": [
            (float(res.omega1[idx[0]]) if idx else None)
            for idx in res.jump_indices
        ],
        "jump_indices": [list(map(int, idx)) for idx in res.jump_indices],
    }
    with open(os.path.join(out, f"{command}_jumps.json"), "w") as f:
        json.dump(jumps, f, indent=1, sort_keys=True)
    _write_metadata(out, cfg, command, t0,
                    unsettled_points=int((~res.settled).sum()))
    if not res.settled.all():
        _warning_report("partial", f"{int((~res.settled).sum())} grid "
                                   "points did not settle within the cap",
                        command=command)
        return res, EXIT_PARTIAL
    return res, EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    plan = cfg.sweep_plan(workers=args.workers)
    _res, rc = _run_sweep_files(args, cfg, "sweep", plan)
    return rc


def cmd_fig2(args, cfg: RunConfig, command: str = "fig2") -> int:
    if cfg.thresholds is None:
        _error_report("config", "figure commands need computable thresholds")
        return EXIT_CONFIG
    plan = cfg.sweep_plan(protocol="coldStart", workers=args.workers)
    _res, rc = _run_sweep_files(args, cfg, command, plan)
    return rc


def cmd_fig4(args, cfg: RunConfig) -> int:
    return cmd_fig2(args, cfg, command="fig4")


def cmd_fig3(args, cfg: RunConfig) -> int:
    if cfg.thresholds is None:
        _error_report("config", "figure commands need computable thresholds")
        return EXIT_CONFIG
    t0 = time.perf_counter()
    ax2 = cfg.fig3_omega2 or AxisSpec(0.0, 0.1 * cfg.thresholds.omega_th, 9)
    plan = cfg.sweep_plan(protocol="coldStart", workers=args.workers,
                          omega2_values=ax2.values())
    res = run_sweep(plan, cfg.sys, cfg.det)
    tmap = threshold_map(plan, cfg.sys, cfg.det, result=res)
    out = _outdir(args, cfg, "fig3")
    res.to_csv(os.path.join(out, "fig3.csv"))
    res.to_json(os.path.join(out, "fig3.json"))
    tmap.to_csv(os.path.join(out, "fig3_threshold_map.csv"))
    with open(os.path.join(out, "fig3_summary.json"), "w") as f:
        json.dump({
            "jump_omega1_non_increasing_in_omega2": tmap.non_increasing,
            "omega2_values": tmap.omega2.tolist(),
            "jump_omega1": tmap.jump_omega1.tolist(),
            "combined_sq_at_jump": tmap.combined_sq.tolist(),
        }, f, indent=1, sort_keys=True)
    _write_metadata(out, cfg, "fig3", t0,
                    unsettled_points=int((~res.settled).sum()))
    if not res.settled.all():
        _warning_report("partial", "some fig3 grid points did not settle",
                        command="fig3")
        return EXIT_PARTIAL
    return EXIT_OK


def _eigen_scan(cfg: RunConfig, scan: str, values, fixed: float):
    """March the seeded non-generating branch, analyzing each point.

    scan = "omega1": values are pump amplitudes at fixed seed amplitude;
    scan = "omega2": values are seed amplitudes at fixed pump amplitude.
    Stops at the first non-converged point or after the abscissa crosses
    zero (the crossing point is included).
    """
    sysp, det = cfg.sys, cfg.det
    rows = []
    stop = "end-of-range"
    guess = None
    for v in values:
        o1, o2 = (v, fixed) if scan == "omega1" else (fixed, v)
        drive = DriveParams(o1, o2)
        if guess is None:
            if o2 == 0.0:
                fp = analytic_low_branch(sysp, det, drive)
            else:
                fp = newton_solve(ModeState(0j, -1j * o2 / sysp.gamma2, 0j),
                                  sysp, det, drive)
        else:
            fp = newton_solve(guess, sysp, det, drive)
        if not fp.converged:
            stop = "newton-failed"
            break
        guess = fp.state
        rep = analyze(fp, sysp, det)
        rows.append((o1, o2, rep))
        if rep.spectral_abscissa > 0 and not rep.marginal:
            stop = "destabilized"
            break
    return rows, stop


def cmd_fig5(args, cfg: RunConfig) -> int:
    if cfg.thresholds is None:
        _error_report("config", "figure commands need computable thresholds")
        return EXIT_CONFIG
    t0 = time.perf_counter()
    th = cfg.thresholds.omega_th
    o2_fixed = cfg.fig5_seed_fraction * th
    o1_fixed = cfg.fig5_pump_fraction * th
    try:
        rows_a, stop_a = _eigen_scan(cfg, "omega1",
                                     np.linspace(0.0, 1.05 * th, 150),
                                     o2_fixed)
        rows_b, stop_b = _eigen_scan(cfg, "omega2",
                                     np.linspace(0.0, 0.1 * th, 100),
                                     o1_fixed)
    except EigenSolverError as e:
        _error_report("numeric", str(e))
        return EXIT_NUMERIC
    out = _outdir(args, cfg, "fig5")
    for name, rows in (("fig5a", rows_a), ("fig5b", rows_b)):
        with open(os.path.join(out, f"{name}.csv"), "w", newline="") as f:
            f.write(StabilityReport.csv_header() + "\n")
            for o1, o2, rep in rows:
                f.write(rep.to_csv_row(o1, o2) + "\n")
    with open(os.path.join(out, "fig5_summary.json"), "w") as f:
        json.dump({
            "panel_a": {"fixed_omega2_per_s": o2_fixed, "points": len(rows_a),
                        "stop": stop_a},
            "panel_b": {"fixed_omega1_per_s": o1_fixed, "points": len(rows_b),
                        "stop": stop_b},
        }, f, indent=1, sort_keys=True)
    _write_metadata(out, cfg, "fig5", t0)
    if not rows_a or not rows_b:
        _error_report("numeric", "eigenvalue scan produced no points")
        return EXIT_NUMERIC
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "steady": cmd_steady,
    "stability": cmd_stability,
    "thresholds": cmd_thresholds,
    "sweep": cmd_sweep,
    "fig2": cmd_fig2,
    "fig3": cmd_fig3,
    "fig4": cmd_fig4,
    "fig5": cmd_fig5,
}

_DEFAULT_PRESET = {cmd: ("soft" if cmd == "fig4" else "fig2")
                   for cmd in _COMMANDS}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hardexc",
        description="Driven three-mode optomechanical system: simulation, "
                    "steady states, stability, thresholds, and sweeps.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        q = sub.add_parser(name)
        q.add_argument("--config", metavar="PATH",
                       help="JSON configuration file")
        q.add_argument("--preset", metavar="NAME", choices=sorted(PRESETS),
                       help="bundled configuration "
                            f"(default: {_DEFAULT_PRESET[name]})")
        q.add_argument("--out", metavar="DIR",
                       help="output directory (or $HARDEXC_OUT_DIR)")
        q.add_argument("--workers", type=int, metavar="N",
                       help="sweep worker processes (default: cpu count)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config and args.preset:
            raise ConfigError("give either --config or --preset, not both")
        if args.config:
            cfg = load_config_file(args.config)
        else:
            cfg = load_config(preset(args.preset
                                     or _DEFAULT_PRESET[args.command]))
    except ConfigError as e:
        _error_report("config", str(e))
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](args, cfg)
    except (StiffnessError, EigenSolverError) as e:
        _error_report("numeric", str(e))
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
