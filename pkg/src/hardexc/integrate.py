"""Adaptive integration of the three-mode ODEs with steady-state detection.

The propagated method is the Dormand-Prince 5(4) embedded pair (see
``_kernels``).  Steady state is declared on the *intensities*: rotating-frame
amplitudes of a phase-unpinned generating state keep rotating, but their
moduli settle, so intensity windows are the robust criterion.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .model import (Detunings, DriveParams, ModeState, SystemParams,
                    rhs_lab, rhs_rotating)

REASON_NAMES = {
    _kernels.REASON_MAXTIME: "maxTime",
    _kernels.REASON_STEADY: "steady",
    _kernels.REASON_MAXSTEPS: "maxSteps",
    _kernels.REASON_OVERFLOW: "overflow",
}


class StiffnessError(RuntimeError):
    """Step size underflowed; the problem is too stiff for the explicit pair."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and termination policy for :func:`integrate`.

    steady_window is measured in units of 1/min(gamma); steady_eps is the
    relative intensity change below which a window counts as steady, with
    abs_tol acting as the absolute intensity floor.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-9
    dt_init: float | None = None
    dt_max: float | None = None
    max_steps: int = 50_000_000
    steady_window: float = 20.0
    steady_eps: float = 1e-9
    record_cap: int = 4096

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.steady_eps <= 0:
            raise ValueError("steady_eps must be positive")
        if self.record_cap < 4:
            raise ValueError("record_cap must be at least 4")

    def with_(self, **kw) -> "IntegratorConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class RotatingRHS:
    """Frame-tagged autonomous right-hand side (the production frame)."""

    sys: SystemParams
    det: Detunings
    drive: DriveParams

    frame = _kernels.FRAME_ROTATING

    def params_array(self) -> np.ndarray:
        s, d = self.sys, self.det
        return np.array([s.gamma1, s.gamma2, s.gamma_b,
                         d.d_omega1, d.delta2, d.d_omega_b,
                         s.g, self.drive.pump_amp, self.drive.seed_amp,
                         0.0, 0.0])

    def rate_scale(self) -> float:
        return max(self.sys.rate_scale(), self.det.rate_scale(),
                   abs(self.sys.g), 1e-300)

    def gamma_min(self) -> float:
        return self.sys.gamma_min

    def __call__(self, state: ModeState, t: float = 0.0) -> ModeState:
        return rhs_rotating(state, self.sys, self.det, self.drive)


@dataclass(frozen=True)
class LabRHS:
    """Frame-tagged lab-frame right-hand side (validation only)."""

    sys: SystemParams
    drive: DriveParams

    frame = _kernels.FRAME_LAB

    def __post_init__(self):
        if not self.sys.has_lab_frame:
            raise ValueError("lab-frame rhs needs absolute mode frequencies")
        if not self.drive.has_carriers:
            raise ValueError("lab-frame rhs needs drive carriers")

    def params_array(self) -> np.ndarray:
        s = self.sys
        return np.array([s.gamma1, s.gamma2, s.gamma_b,
                         s.omega1, s.omega2, s.omega_b,
                         s.g, self.drive.pump_amp, self.drive.seed_amp,
                         self.drive.pump_freq, self.drive.seed_freq])

    def rate_scale(self) -> float:
        s = self.sys
        return max(s.rate_scale(), s.omega1, s.omega2, s.omega_b,
                   abs(s.g), 1e-300)

    def gamma_min(self) -> float:
        return self.sys.gamma_min

    def __call__(self, state: ModeState, t: float = 0.0) -> ModeState:
        return rhs_lab(state, t, self.sys, self.drive)


@dataclass
class Trajectory:
    """Recorded samples of one integration run."""

    t: np.ndarray
    states: np.ndarray
    reason: str
    n_accept: int
    n_reject: int
    intensities: np.ndarray = field(init=False)

    def __post_init__(self):
        self.intensities = self.states.real ** 2 + self.states.imag ** 2

    @property
    def final_state(self) -> ModeState:
        return ModeState.from_array(self.states[-1])

    @property
    def final_time(self) -> float:
        return float(self.t[-1])

    def to_csv(self, path_or_file) -> None:
        """Write t, Re/Im of each amplitude, and the three intensities."""
        close = False
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            f = open(path_or_file, "w", newline="")
            close = True
        else:
            f = path_or_file
        try:
            f.write("t,re_a1,im_a1,re_a2,im_a2,re_b,im_b,I1,I2,Ib\n")
            for i in range(len(self.t)):
                s = self.states[i]
                ii = self.intensities[i]
                f.write("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n"
                        % (self.t[i], s[0].real, s[0].imag, s[1].real, s[1].imag,
                           s[2].real, s[2].imag, ii[0], ii[1], ii[2]))
        finally:
            if close:
                f.close()


def _auto_dt(rhs_obj, t_span: float, cfg: IntegratorConfig) -> float:
    dt = 0.01 / rhs_obj.rate_scale()
    if cfg.dt_max is not None:
        dt = min(dt, cfg.dt_max)
    return min(dt, t_span) if t_span > 0 else dt


def integrate(rhs_obj, init: ModeState, t_end: float, cfg: IntegratorConfig,
              t0: float = 0.0) -> Trajectory:
    """March the tagged right-hand side from t0 to t_end.

    Local error per step is kept below abs_tol + rel_tol*|amplitude| in the
    scaled RMS sense.  Divergence beyond |amplitude| = 1e30 ends the run with
    reason "overflow"; a vanishing step size raises :class:`StiffnessError`.
    """
    if t_end < t0:
        raise ValueError("t_end must be >= t0")
    y0 = init.as_array()

    gmin = rhs_obj.gamma_min()
    if cfg.steady_window > 0 and gmin > 0:
        window = cfg.steady_window / gmin
    else:
        window = 0.0

    dt0 = cfg.dt_init if cfg.dt_init is not None else _auto_dt(rhs_obj, t_end - t0, cfg)
    dt_max = cfg.dt_max if cfg.dt_max is not None else np.inf

    (reason, n_rec, rec_t, rec_y, n_acc, n_rej, _t, _y, _dt) = _kernels.integrate_core(
        rhs_obj.frame, y0, t0, t_end, rhs_obj.params_array(),
        cfg.rel_tol, cfg.abs_tol, dt0, dt_max, cfg.max_steps,
        window, cfg.steady_eps, cfg.abs_tol, cfg.record_cap)

    if reason == _kernels.REASON_DT_UNDERFLOW:
        raise StiffnessError(
            f"step size underflow at t={_t!r} after {n_acc} accepted steps; "
            "the problem is too stiff for the explicit 5(4) pair")

    return Trajectory(t=rec_t[:n_rec].copy(), states=rec_y[:n_rec].copy(),
                      reason=REASON_NAMES[reason], n_accept=n_acc, n_reject=n_rej)


def settle(rhs_obj, init: ModeState, cfg: IntegratorConfig,
           t_cap: float | None = None):
    """Integrate until the intensities stop changing; returns (state, settled).

    The time cap defaults to 1e3/min(gamma); settled is True iff the run
    terminated through the steady-state detector rather than the cap.
    """
    if t_cap is None:
        gmin = rhs_obj.gamma_min()
        if gmin <= 0:
            raise ValueError("settle needs a positive minimum decay rate "
                             "or an explicit t_cap")
        t_cap = 1e3 / gmin
    traj = integrate(rhs_obj, init, t_cap, cfg)
    return traj.final_state, traj.reason == "steady"
