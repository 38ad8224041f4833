"""JSON run configuration: schema validation, unit conversion, resolution.

Physical rates and frequencies are entered caption-style as value/2pi in Hz
(keys end in _hz) and are converted to rad/s on load.  Drive amplitudes are
direct rates in 1/s and may be written either as numbers or as
{"relative_to_th": x}, resolved against the closed-form threshold at load
time.  Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .integrate import IntegratorConfig
from .model import Detunings, DriveParams, SystemParams, TWO_PI
from .stability import ThresholdSet, thresholds
from .sweep import AxisSpec, SweepPlan


class ConfigError(ValueError):
    """Configuration failed schema validation or resolution."""


def _require_mapping(obj, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")


def _check_keys(obj, allowed, where):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}; "
                          f"allowed: {sorted(allowed)}")


def _number(obj, where, allow_none=False):
    if obj is None and allow_none:
        return None
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {obj!r}")
    v = float(obj)
    if not math.isfinite(v):
        raise ConfigError(f"{where}: must be finite")
    return v


def _amplitude(obj, th: ThresholdSet | None, where):
    """A drive amplitude: plain number in 1/s or {'relative_to_th': x}."""
    if isinstance(obj, dict):
        _check_keys(obj, ("relative_to_th",), where)
        if "relative_to_th" not in obj:
            raise ConfigError(f"{where}: needs 'relative_to_th'")
        x = _number(obj["relative_to_th"], f"{where}.relative_to_th")
        if th is None:
            raise ConfigError(f"{where}: relative_to_th needs computable "
                              "thresholds (positive rates, nonzero coupling)")
        return x * th.omega_th
    return _number(obj, where)


@dataclass
class RunConfig:
    """Fully resolved run configuration (all rates angular, rad/s)."""

    sys: SystemParams
    det: Detunings
    drive: DriveParams
    integrator: IntegratorConfig
    thresholds: ThresholdSet | None
    sweep_omega1: AxisSpec
    sweep_omega2_values: tuple
    sweep_protocol: str
    sweep_kick_rel: float
    sweep_settle_cap: float
    sweep_workers: int | None
    sweep_checkpoint: str | None
    fig3_omega2: AxisSpec | None
    fig5_seed_fraction: float
    fig5_pump_fraction: float
    simulate_t_end_over_gamma: float
    simulate_kick_rel: float
    out_dir: str | None
    raw: dict = field(repr=False, default_factory=dict)

    def sweep_plan(self, protocol=None, omega1=None, omega2_values=None,
                   workers=None, checkpoint_dir=None) -> SweepPlan:
        return SweepPlan(
            omega1=omega1 or self.sweep_omega1,
            omega2_values=(self.sweep_omega2_values if omega2_values is None
                           else tuple(omega2_values)),
            protocol=protocol or self.sweep_protocol,
            integrator=self.integrator,
            workers=self.sweep_workers if workers is None else workers,
            checkpoint_dir=(self.sweep_checkpoint if checkpoint_dir is None
                            else checkpoint_dir),
            kick_rel=self.sweep_kick_rel,
            settle_cap=self.sweep_settle_cap,
        )

    def resolved_metadata(self) -> dict:
        from dataclasses import asdict
        md = {
            "system_rad_per_s": asdict(self.sys),
            "detunings_rad_per_s": asdict(self.det),
            "drive_per_s": {"pump_amp": self.drive.pump_amp,
                            "seed_amp": self.drive.seed_amp},
            "integrator": asdict(self.integrator),
        }
        if self.thresholds is not None:
            md["thresholds_per_s"] = {
                "omega_ex": self.thresholds.omega_ex,
                "omega_th": self.thresholds.omega_th,
                "hard_mode": self.thresholds.hard_mode,
            }
        return md


_TOP_KEYS = ("system", "detunings", "drive", "integrator", "sweep", "fig5",
             "simulate", "output_dir")

_SYSTEM_KEYS = ("gamma1_hz", "gamma2_hz", "gamma_b_hz", "g_hz",
                "omega1_hz", "omega2_hz", "omega_b_hz")

_DET_KEYS = ("d_omega1_hz", "d_omega_b_hz", "delta2_hz")

_DRIVE_KEYS = ("pump_amp", "seed_amp")

_INT_KEYS = ("rel_tol", "abs_tol", "dt_init", "dt_max", "max_steps",
             "steady_window", "steady_eps")

_SWEEP_KEYS = ("omega1", "omega2", "omega2_values", "protocol", "kick_rel",
               "settle_cap", "workers", "checkpoint_dir")

_AXIS_KEYS = ("min", "max", "count", "spacing")

_FIG5_KEYS = ("seed_fraction", "pump_fraction")

_SIM_KEYS = ("t_end_over_gamma", "kick_rel")


def _axis(obj, th, where, default_lo=0.0) -> AxisSpec:
    _require_mapping(obj, where)
    _check_keys(obj, _AXIS_KEYS, where)
    lo = _amplitude(obj.get("min", default_lo), th, f"{where}.min")
    if "max" not in obj:
        raise ConfigError(f"{where}: needs 'max'")
    hi = _amplitude(obj["max"], th, f"{where}.max")
    count = obj.get("count", 200)
    if isinstance(count, bool) or not isinstance(count, int):
        raise ConfigError(f"{where}.count: expected an integer")
    spacing = obj.get("spacing", "linear")
    if spacing not in ("linear", "log"):
        raise ConfigError(f"{where}.spacing: 'linear' or 'log'")
    return AxisSpec(lo=lo, hi=hi, count=count, spacing=spacing)


def load_config(doc: dict) -> RunConfig:
    """Validate and resolve a configuration document."""
    _require_mapping(doc, "config")
    _check_keys(doc, _TOP_KEYS, "config")

    if "system" not in doc:
        raise ConfigError("config: 'system' section is required")
    s = doc["system"]
    _require_mapping(s, "system")
    _check_keys(s, _SYSTEM_KEYS, "system")
    for k in ("gamma1_hz", "gamma2_hz", "gamma_b_hz", "g_hz"):
        if k not in s:
            raise ConfigError(f"system: '{k}' is required")
    try:
        sys = SystemParams.from_hz(
            _number(s["gamma1_hz"], "system.gamma1_hz"),
            _number(s["gamma2_hz"], "system.gamma2_hz"),
            _number(s["gamma_b_hz"], "system.gamma_b_hz"),
            _number(s["g_hz"], "system.g_hz"),
            _number(s.get("omega1_hz"), "system.omega1_hz", allow_none=True),
            _number(s.get("omega2_hz"), "system.omega2_hz", allow_none=True),
            _number(s.get("omega_b_hz"), "system.omega_b_hz", allow_none=True),
        )
    except ValueError as e:
        raise ConfigError(f"system: {e}") from None

    if "detunings" not in doc:
        raise ConfigError("config: 'detunings' section is required")
    d = doc["detunings"]
    _require_mapping(d, "detunings")
    _check_keys(d, _DET_KEYS, "detunings")
    if "d_omega1_hz" not in d:
        raise ConfigError("detunings: 'd_omega1_hz' is required")
    d1 = _number(d["d_omega1_hz"], "detunings.d_omega1_hz")
    db = _number(d.get("d_omega_b_hz"), "detunings.d_omega_b_hz",
                 allow_none=True)
    d2 = _number(d.get("delta2_hz", 0.0), "detunings.delta2_hz")
    det = Detunings.from_values(TWO_PI * d1,
                                None if db is None else TWO_PI * db,
                                TWO_PI * d2)

    try:
        th = thresholds(sys, det)
    except ValueError:
        th = None

    drv = doc.get("drive", {})
    _require_mapping(drv, "drive")
    _check_keys(drv, _DRIVE_KEYS, "drive")
    pump = _amplitude(drv.get("pump_amp", 0.0), th, "drive.pump_amp")
    seed = _amplitude(drv.get("seed_amp", 0.0), th, "drive.seed_amp")
    if pump < 0 or seed < 0:
        raise ConfigError("drive amplitudes must be nonnegative")
    drive = DriveParams(pump, seed)

    icfg = doc.get("integrator", {})
    _require_mapping(icfg, "integrator")
    _check_keys(icfg, _INT_KEYS, "integrator")
    kw = {}
    for k in _INT_KEYS:
        if k in icfg:
            if k == "max_steps":
                if isinstance(icfg[k], bool) or not isinstance(icfg[k], int):
                    raise ConfigError("integrator.max_steps: integer expected")
                kw[k] = icfg[k]
            elif k in ("dt_init", "dt_max"):
                kw[k] = _number(icfg[k], f"integrator.{k}", allow_none=True)
            else:
                kw[k] = _number(icfg[k], f"integrator.{k}")
    try:
        integrator = IntegratorConfig(**kw)
    except ValueError as e:
        raise ConfigError(f"integrator: {e}") from None

    sw = doc.get("sweep", {})
    _require_mapping(sw, "sweep")
    _check_keys(sw, _SWEEP_KEYS, "sweep")
    if "omega1" in sw:
        ax1 = _axis(sw["omega1"], th, "sweep.omega1")
    elif th is not None:
        ax1 = AxisSpec(0.0, 1.2 * th.omega_th, 200)
    else:
        ax1 = AxisSpec(0.0, 1.0, 50)
    if "omega2_values" in sw:
        vals = sw["omega2_values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("sweep.omega2_values: nonempty list expected")
        o2vals = tuple(_amplitude(v, th, "sweep.omega2_values[]")
                       for v in vals)
    else:
        o2vals = (0.0,)
    ax2 = _axis(sw["omega2"], th, "sweep.omega2") if "omega2" in sw else None
    protocol = sw.get("protocol", "coldStart")
    kick = _number(sw.get("kick_rel", 1e-8), "sweep.kick_rel")
    cap = _number(sw.get("settle_cap", 1e3), "sweep.settle_cap")
    workers = sw.get("workers")
    if workers is not None and (isinstance(workers, bool)
                                or not isinstance(workers, int)):
        raise ConfigError("sweep.workers: integer or null")
    ckpt = sw.get("checkpoint_dir")
    if ckpt is not None and not isinstance(ckpt, str):
        raise ConfigError("sweep.checkpoint_dir: string or null")

    f5 = doc.get("fig5", {})
    _require_mapping(f5, "fig5")
    _check_keys(f5, _FIG5_KEYS, "fig5")
    f5_seed = _number(f5.get("seed_fraction", 0.07), "fig5.seed_fraction")
    f5_pump = _number(f5.get("pump_fraction", 0.7), "fig5.pump_fraction")

    sim = doc.get("simulate", {})
    _require_mapping(sim, "simulate")
    _check_keys(sim, _SIM_KEYS, "simulate")
    t_end = _number(sim.get("t_end_over_gamma", 1e3), "simulate.t_end_over_gamma")
    sim_kick = _number(sim.get("kick_rel", 1e-8), "simulate.kick_rel")

    out_dir = doc.get("output_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("output_dir: string expected")

    if protocol not in ("coldStart", "sweepUp", "sweepDown"):
        raise ConfigError("sweep.protocol must be coldStart|sweepUp|sweepDown")

    return RunConfig(sys=sys, det=det, drive=drive, integrator=integrator,
                     thresholds=th, sweep_omega1=ax1,
                     sweep_omega2_values=o2vals, sweep_protocol=protocol,
                     sweep_kick_rel=kick, sweep_settle_cap=cap,
                     sweep_workers=workers, sweep_checkpoint=ckpt,
                     fig3_omega2=ax2, fig5_seed_fraction=f5_seed,
                     fig5_pump_fraction=f5_pump,
                     simulate_t_end_over_gamma=t_end,
                     simulate_kick_rel=sim_kick,
                     out_dir=out_dir, raw=doc)


def load_config_file(path: str) -> RunConfig:
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    return load_config(doc)
