"""Batch engine: 1D/2D settled-intensity maps, hysteresis protocols, jump
detection, parallel scheduling, and checkpoint/resume.

Protocols
---------
coldStart
    Every grid point starts at the origin and settles (the switch-on
    transient included), then receives a relative noise-floor kick in the
    (a2, b) pair and settles again.  The kick makes linear instabilities of
    the reached state observable: without it the a2 = b = 0 plane is exactly
    invariant and a cold start can never leave a destabilized non-generating
    state.  kick_rel = 0 disables it.
sweepUp / sweepDown
    Points run in pump-amplitude order (ascending/descending); each point
    starts from the previous settled state plus the same noise-floor kick.

Every point is a pure function of the plan and the physical parameters, so
results are identical for any worker count, and a killed sweep resumed from
its checkpoint reproduces the result bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__ as _ENGINE_VERSION
from .integrate import IntegratorConfig, RotatingRHS, StiffnessError, settle
from .model import Detunings, DriveParams, ModeState, ORIGIN, SystemParams

PROTOCOLS = ("coldStart", "sweepUp", "sweepDown")


@dataclass(frozen=True)
class AxisSpec:
    """One sweep axis: count values from lo to hi, linear or log spaced."""

    lo: float
    hi: float
    count: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("axis needs at least 2 points")
        if not self.lo < self.hi:
            raise ValueError("axis needs lo < hi")
        if self.spacing not in ("linear", "log"):
            raise ValueError("spacing must be 'linear' or 'log'")
        if self.spacing == "log" and self.lo <= 0:
            raise ValueError("log spacing needs lo > 0")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class SweepPlan:
    """Grid, protocol, and per-point integration policy for one sweep."""

    omega1: AxisSpec
    omega2_values: tuple = (0.0,)
    protocol: str = "coldStart"
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    workers: int | None = None
    checkpoint_dir: str | None = None
    kick_rel: float = 1e-8
    settle_cap: float = 1e3

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}")
        if self.kick_rel < 0:
            raise ValueError("kick_rel must be nonnegative")
        if self.settle_cap <= 0:
            raise ValueError("settle_cap must be positive")
        object.__setattr__(self, "omega2_values",
                           tuple(float(v) for v in self.omega2_values))
        for v in self.omega2_values:
            if v < 0 or not math.isfinite(v):
                raise ValueError("omega2 values must be finite and nonnegative")


def _kicked(state: ModeState, kick_rel: float) -> ModeState:
    if kick_rel == 0.0:
        return state
    eps = kick_rel * max(state.norm(), 1.0)
    return ModeState(state.a1, state.a2 + eps, state.b + eps)


def _settle_point(sys, det, plan, o1, o2, init, two_phase):
    """One grid point: returns (I1, I2, Ib, settled, reason, wall, state6)."""
    t0 = time.perf_counter()
    drive = DriveParams(o1, o2)
    rhs = RotatingRHS(sys, det, drive)
    cap = plan.settle_cap / sys.gamma_min
    try:
        settled = True
        st = init
        if two_phase:
            st, ok1 = settle(rhs, st, plan.integrator, t_cap=cap)
            settled = ok1
        st, ok2 = settle(rhs, _kicked(st, plan.kick_rel), plan.integrator,
                         t_cap=cap)
        settled = settled and ok2
        reason = "steady" if settled else "unsettled"
        i1, i2, ib = st.intensities
        out = (i1, i2, ib, settled, reason, time.perf_counter() - t0,
               (st.a1.real, st.a1.imag, st.a2.real, st.a2.imag,
                st.b.real, st.b.imag))
    except StiffnessError:
        nan = float("nan")
        out = (nan, nan, nan, False, "stiffness", time.perf_counter() - t0,
               (nan,) * 6)
    return out


# ---------------------------------------------------------------------------
# checkpoint shards


def _shard_name(i2: int, i1: int) -> str:
    return f"p_{i2:04d}_{i1:05d}.csv"


_SHARD_HEADER = ("Omega1,Omega2,I1,I2,Ib,settled,reason,wall,"
                 "re_a1,im_a1,re_a2,im_a2,re_b,im_b\n")


def _write_shard(ckpt_dir, i2, i1, o1, o2, rec):
    i1v, i2v, ibv, settled, reason, wall, s6 = rec
    path = os.path.join(ckpt_dir, "shards", _shard_name(i2, i1))
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as f:
        f.write(_SHARD_HEADER)
        f.write("%.17g,%.17g,%.17g,%.17g,%.17g,%d,%s,%.6g,"
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n"
                % (o1, o2, i1v, i2v, ibv, int(settled), reason, wall, *s6))
    os.replace(tmp, path)


def _read_shard(ckpt_dir, i2, i1):
    path = os.path.join(ckpt_dir, "shards", _shard_name(i2, i1))
    if not os.path.exists(path):
        return None
    with open(path, newline="") as f:
        lines = f.read().splitlines()
    if len(lines) != 2 or lines[0] != _SHARD_HEADER.strip():
        return None
    c = lines[1].split(",")
    return (float(c[2]), float(c[3]), float(c[4]), bool(int(c[5])), c[6],
            float(c[7]), tuple(float(x) for x in c[8:14]))


def _plan_fingerprint(plan: SweepPlan, sys: SystemParams, det: Detunings) -> str:
    blob = json.dumps({
        "plan": {k: v for k, v in asdict(plan).items()
                 if k not in ("workers", "checkpoint_dir")},
        "system": asdict(sys),
        "detunings": asdict(det),
    }, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _init_checkpoint(plan, sys, det):
    ckpt = plan.checkpoint_dir
    os.makedirs(os.path.join(ckpt, "shards"), exist_ok=True)
    manifest_path = os.path.join(ckpt, "manifest.json")
    fp = _plan_fingerprint(plan, sys, det)
    manifest = {
        "format": "hardexc-sweep-checkpoint-1",
        "fingerprint": fp,
        "engine_version": _ENGINE_VERSION,
        "protocol": plan.protocol,
        "omega1_grid": [float(v) for v in plan.omega1.values()],
        "omega2_values": list(plan.omega2_values),
    }
    if os.path.exists(manifest_path):
        with open(manifest_path) as f:
            old = json.load(f)
        if old.get("fingerprint") != fp:
            raise ValueError(
                "checkpoint directory belongs to a different sweep "
                f"({manifest_path}); refusing to mix results")
    else:
        tmp = manifest_path + ".tmp"
        with open(tmp, "w") as f:
            json.dump(manifest, f, indent=1, sort_keys=True)
        os.replace(tmp, manifest_path)


# ---------------------------------------------------------------------------
# worker tasks (top level: must be picklable)


def _cold_task(args):
    sys, det, plan, i2, i1, o1, o2 = args
    if plan.checkpoint_dir:
        rec = _read_shard(plan.checkpoint_dir, i2, i1)
        if rec is not None:
            return (i2, i1, rec)
    rec = _settle_point(sys, det, plan, o1, o2, ORIGIN, two_phase=True)
    if plan.checkpoint_dir:
        _write_shard(plan.checkpoint_dir, i2, i1, o1, o2, rec)
    return (i2, i1, rec)


def _row_task(args):
    """One hysteresis row, sequential in protocol order, shard-resumable."""
    sys, det, plan, i2, o2, omega1_values = args
    n1 = len(omega1_values)
    order = range(n1) if plan.protocol == "sweepUp" else range(n1 - 1, -1, -1)
    state = ORIGIN
    records = [None] * n1
    resuming = plan.checkpoint_dir is not None
    for i1 in order:
        o1 = float(omega1_values[i1])
        if resuming:
            rec = _read_shard(plan.checkpoint_dir, i2, i1)
            if rec is not None:
                records[i1] = rec
                s6 = rec[6]
                if all(math.isfinite(v) for v in s6):
                    state = ModeState(complex(s6[0], s6[1]),
                                      complex(s6[2], s6[3]),
                                      complex(s6[4], s6[5]))
                continue
            resuming = False  # first gap: compute everything from here on
        rec = _settle_point(sys, det, plan, o1, o2, state, two_phase=False)
        records[i1] = rec
        if plan.checkpoint_dir:
            _write_shard(plan.checkpoint_dir, i2, i1, o1, o2, rec)
        s6 = rec[6]
        if all(math.isfinite(v) for v in s6):
            state = ModeState(complex(s6[0], s6[1]), complex(s6[2], s6[3]),
                              complex(s6[4], s6[5]))
    return (i2, records)


# ---------------------------------------------------------------------------
# results


@dataclass
class SweepResult:
    """Settled intensities over the grid plus per-point bookkeeping."""

    omega1: np.ndarray
    omega2: np.ndarray
    intensities: np.ndarray        # [n2, n1, 3]
    settled: np.ndarray            # bool [n2, n1]
    reasons: list                  # [n2][n1] str
    wall: np.ndarray               # [n2, n1] seconds (not part of data equality)
    final_states: np.ndarray       # [n2, n1, 3] complex
    protocol: str
    metadata: dict
    jump_indices: list = field(default_factory=list)   # per row

    def detect_jumps(self, factor: float = 1e3, floor_rel: float = 3e-4):
        self.jump_indices = [
            detect_jump(self.intensities[r, :, 2], factor=factor,
                        floor_rel=floor_rel)
            for r in range(len(self.omega2))
        ]
        return self.jump_indices

    def data_equal(self, other: "SweepResult") -> bool:
        """Bitwise equality of everything except wall-clock timings."""
        return (np.array_equal(self.omega1, other.omega1)
                and np.array_equal(self.omega2, other.omega2)
                and np.array_equal(self.intensities, other.intensities)
                and np.array_equal(self.settled, other.settled)
                and self.reasons == other.reasons
                and np.array_equal(self.final_states, other.final_states)
                and self.protocol == other.protocol)

    def to_csv(self, path_or_file) -> None:
        """Long format: Omega1, Omega2, I1, I2, Ib, settled."""
        close = False
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            f = open(path_or_file, "w", newline="")
            close = True
        else:
            f = path_or_file
        try:
            f.write("Omega1,Omega2,I1,I2,Ib,settled\n")
            for r, o2 in enumerate(self.omega2):
                for c, o1 in enumerate(self.omega1):
                    i1, i2, ib = self.intensities[r, c]
                    f.write("%.17g,%.17g,%.17g,%.17g,%.17g,%d\n"
                            % (o1, o2, i1, i2, ib, int(self.settled[r, c])))
        finally:
            if close:
                f.close()

    def to_json(self, path) -> None:
        rows = []
        for r, o2 in enumerate(self.omega2):
            pts = []
            for c, o1 in enumerate(self.omega1):
                i1, i2, ib = self.intensities[r, c]
                pts.append({"omega1": float(o1), "I1": float(i1),
                            "I2": float(i2), "Ib": float(ib),
                            "settled": bool(self.settled[r, c]),
                            "reason": self.reasons[r][c]})
            row = {"omega2": float(o2), "points": pts}
            if self.jump_indices:
                row["jump_indices"] = list(map(int, self.jump_indices[r]))
            rows.append(row)
        doc = {"metadata": self.metadata, "rows": rows,
               "timing": {"wall_points_s": self.wall.tolist(),
                          "note": "wall timings are not reproducible data"}}
        with open(path, "w") as f:
            json.dump(doc, f, indent=1, sort_keys=True)


def run_sweep(plan: SweepPlan, sys: SystemParams, det: Detunings) -> SweepResult:
    """Execute the plan; per-point failures are recorded in-band."""
    if sys.gamma_min <= 0:
        raise ValueError("sweeps need positive decay rates for settle caps")
    omega1_values = plan.omega1.values()
    n1 = len(omega1_values)
    n2 = len(plan.omega2_values)
    if plan.checkpoint_dir:
        _init_checkpoint(plan, sys, det)

    workers = plan.workers if plan.workers is not None else (os.cpu_count() or 1)
    workers = max(1, int(workers))

    if plan.protocol == "coldStart":
        tasks = [(sys, det, plan, i2, i1, float(omega1_values[i1]), o2)
                 for i2, o2 in enumerate(plan.omega2_values)
                 for i1 in range(n1)]
        results = _run_tasks(_cold_task, tasks, workers)
        records = [[None] * n1 for _ in range(n2)]
        for i2, i1, rec in results:
            records[i2][i1] = rec
    else:
        tasks = [(sys, det, plan, i2, o2, omega1_values)
                 for i2, o2 in enumerate(plan.omega2_values)]
        results = _run_tasks(_row_task, tasks, workers)
        records = [None] * n2
        for i2, row in results:
            records[i2] = row

    intensities = np.empty((n2, n1, 3))
    settled = np.empty((n2, n1), dtype=bool)
    reasons = [[""] * n1 for _ in range(n2)]
    wall = np.empty((n2, n1))
    states = np.empty((n2, n1, 3), dtype=np.complex128)
    for r in range(n2):
        for c in range(n1):
            i1v, i2v, ibv, ok, reason, w, s6 = records[r][c]
            intensities[r, c] = (i1v, i2v, ibv)
            settled[r, c] = ok
            reasons[r][c] = reason
            wall[r, c] = w
            states[r, c] = (complex(s6[0], s6[1]), complex(s6[2], s6[3]),
                            complex(s6[4], s6[5]))

    metadata = {
        "engine_version": _ENGINE_VERSION,
        "protocol": plan.protocol,
        "parameters": {
            "system_rad_per_s": asdict(sys),
            "detunings_rad_per_s": asdict(det),
            "integrator": asdict(plan.integrator),
            "kick_rel": plan.kick_rel,
            "settle_cap_over_gamma_min": plan.settle_cap,
        },
        "omega1_grid": [float(v) for v in omega1_values],
        "omega2_values": list(plan.omega2_values),
    }
    res = SweepResult(omega1=np.asarray(omega1_values),
                      omega2=np.asarray(plan.omega2_values, dtype=float),
                      intensities=intensities, settled=settled,
                      reasons=reasons, wall=wall, final_states=states,
                      protocol=plan.protocol, metadata=metadata)
    res.detect_jumps()
    return res


def _run_tasks(fn, tasks, workers):
    if workers == 1 or len(tasks) == 1:
        return [fn(t) for t in tasks]
    import multiprocessing as mp
    ctx = mp.get_context()
    with ctx.Pool(processes=min(workers, len(tasks))) as pool:
        return pool.map(fn, tasks, chunksize=1)


def detect_jump(row, factor: float = 1e3, floor_rel: float = 3e-4):
    """Indices k where row[k] has risen by >= factor from row[k-1].

    Ratios are floored at floor_rel * max(row) so that climbs out of an
    exact-zero numerical floor (below an excitation onset) do not register:
    a smooth onset never multiplies the floored value by the large factor,
    while a genuine branch switch does.  Returns the grid indices of the
    points just after each qualifying step.
    """
    row = np.asarray(row, dtype=float)
    if row.ndim != 1:
        raise ValueError("detect_jump expects a 1-D row of intensities")
    if len(row) < 2:
        return []
    mx = float(np.nanmax(row)) if np.any(np.isfinite(row)) else 0.0
    if not (mx > 0):
        return []
    f = floor_rel * mx
    out = []
    for k in range(1, len(row)):
        a, b = row[k - 1], row[k]
        if not (math.isfinite(a) and math.isfinite(b)):
            continue
        if (b + f) >= factor * (a + f):
            out.append(k)
    return out


@dataclass
class ThresholdMap:
    """Per-seed-row jump location of a 2D sweep."""

    omega2: np.ndarray
    jump_omega1: np.ndarray        # nan where no jump was found
    jump_index: list
    combined_sq: np.ndarray        # Omega1^2 + Omega2^2 at the jump (nan if none)
    non_increasing: bool

    def to_csv(self, path_or_file) -> None:
        close = False
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            f = open(path_or_file, "w", newline="")
            close = True
        else:
            f = path_or_file
        try:
            f.write("Omega2,jump_Omega1,combined_sq\n")
            for o2, j, c in zip(self.omega2, self.jump_omega1, self.combined_sq):
                f.write("%.17g,%.17g,%.17g\n" % (o2, j, c))
        finally:
            if close:
                f.close()


def threshold_map(plan: SweepPlan, sys: SystemParams, det: Detunings,
                  factor: float = 1e3, floor_rel: float = 3e-4,
                  result: SweepResult | None = None) -> ThresholdMap:
    """Jump location per seed row (first qualifying step of |b|^2).

    Runs the sweep unless a matching result is supplied.  Rows without a
    qualifying jump are marked with NaN.
    """
    res = result if result is not None else run_sweep(plan, sys, det)
    n2 = len(res.omega2)
    jump_o1 = np.full(n2, np.nan)
    combined = np.full(n2, np.nan)
    jidx = []
    for r in range(n2):
        hits = detect_jump(res.intensities[r, :, 2], factor=factor,
                           floor_rel=floor_rel)
        if hits:
            k = hits[0]
            jump_o1[r] = res.omega1[k]
            combined[r] = res.omega1[k] ** 2 + res.omega2[r] ** 2
            jidx.append(k)
        else:
            jidx.append(-1)
    found = np.isfinite(jump_o1)
    ji = jump_o1[found]
    non_inc = bool(np.all(np.diff(ji) <= 0)) if len(ji) > 1 else True
    return ThresholdMap(omega2=res.omega2.copy(), jump_omega1=jump_o1,
                        jump_index=jidx, combined_sq=combined,
                        non_increasing=non_inc)
