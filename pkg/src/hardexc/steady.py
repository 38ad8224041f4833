"""Stationary states: damped Newton, analytic limits, and arclength continuation.

Fixed points solve the rotating-frame stationarity system.  With a seed the
system is phase-pinned and the plain 6-real Newton applies.  Without a seed
the generating branch is a circle of states rotating at a pulled frequency
nu in the (a2, b) pair; it is found by augmenting the unknowns with nu and
pinning the gauge with Im(b) = 0, which restores a regular square system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .integrate import IntegratorConfig, RotatingRHS, settle
from .model import Detunings, DriveParams, ModeState, SystemParams, rhs_rotating
from .stability import jacobian, jacobian_corotating

#: fraction of the gain-clamp phonon scale above which a state counts as generating
_HIGH_LABEL_FRACTION = 0.05


def _state_to_x(state: ModeState) -> np.ndarray:
    return np.array([state.a1.real, state.a1.imag,
                     state.a2.real, state.a2.imag,
                     state.b.real, state.b.imag])


def _x_to_state(x) -> ModeState:
    return ModeState(complex(x[0], x[1]), complex(x[2], x[3]), complex(x[4], x[5]))


def residual(state: ModeState, sys: SystemParams, det: Detunings,
             drive: DriveParams) -> np.ndarray:
    """Six real components (Re, Im interleaved) of the stationarity defect."""
    d = rhs_rotating(state, sys, det, drive)
    return np.array([d.a1.real, d.a1.imag, d.a2.real, d.a2.imag,
                     d.b.real, d.b.imag])


def _tol_scale(x: np.ndarray, sys: SystemParams, det: Detunings) -> float:
    rate = max(sys.rate_scale(), det.rate_scale(), abs(sys.g), 1e-300)
    return 1.0 + math.sqrt(float(x @ x)) * rate


def _phonon_scale(sys: SystemParams, det: Detunings) -> float:
    """Gain-clamp intensity scale of the generating branch (labeling only)."""
    if sys.g == 0 or sys.gamma2 <= 0 or sys.gamma_b <= 0:
        return math.inf
    gam = sys.gamma2 + sys.gamma_b
    return (sys.gamma2 * sys.gamma_b * (1.0 + (det.d_omega_b / gam) ** 2)
            / sys.g ** 2)


def _label(state: ModeState, sys: SystemParams, det: Detunings) -> str:
    scale = _phonon_scale(sys, det)
    if not math.isfinite(scale):
        return "low"
    return "high" if abs(state.b) ** 2 > _HIGH_LABEL_FRACTION * scale else "low"


@dataclass(frozen=True)
class FixedPoint:
    """A stationary state with its convergence record.

    nu is the co-rotation frequency of the (a2, b) pair: zero for seed-pinned
    fixed points, nonzero on the phase-free generating branch of the unseeded
    system (where the state rotates but every intensity is constant).
    """

    state: ModeState
    residual_norm: float
    branch: str
    converged: bool
    nu: float = 0.0
    iterations: int = 0

    @property
    def intensities(self):
        return self.state.intensities


def newton_solve(guess: ModeState, sys: SystemParams, det: Detunings,
                 drive: DriveParams, tol: float = 1e-10,
                 max_iter: int = 50) -> FixedPoint:
    """Damped Newton on the 6-real stationarity system.

    Convergence criterion: ||residual||_2 <= tol * (1 + ||state|| * max rate).
    Backtracking halves the step up to 20 times on residual increase; a
    singular Jacobian or a failed line search yields branch "unresolved".
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = _state_to_x(guess)
    r = residual(_x_to_state(x), sys, det, drive)
    rn = float(np.sqrt(r @ r))
    for it in range(max_iter):
        if rn <= tol * _tol_scale(x, sys, det):
            st = _x_to_state(x)
            return FixedPoint(st, rn, _label(st, sys, det), True, 0.0, it)
        j = jacobian(_x_to_state(x), sys, det)
        try:
            dx = np.linalg.solve(j, -r)
        except np.linalg.LinAlgError:
            return FixedPoint(_x_to_state(x), rn, "unresolved", False, 0.0, it)
        if not np.all(np.isfinite(dx)):
            return FixedPoint(_x_to_state(x), rn, "unresolved", False, 0.0, it)
        lam = 1.0
        for _ in range(20):
            xt = x + lam * dx
            rt = residual(_x_to_state(xt), sys, det, drive)
            rtn = float(np.sqrt(rt @ rt))
            if np.isfinite(rtn) and rtn < rn:
                x, r, rn = xt, rt, rtn
                break
            lam *= 0.5
        else:
            return FixedPoint(_x_to_state(x), rn, "unresolved", False, 0.0, it + 1)
    if rn <= tol * _tol_scale(x, sys, det):
        st = _x_to_state(x)
        return FixedPoint(st, rn, _label(st, sys, det), True, 0.0, max_iter)
    return FixedPoint(_x_to_state(x), rn, "unresolved", False, 0.0, max_iter)


def analytic_low_branch(sys: SystemParams, det: Detunings,
                        drive: DriveParams) -> FixedPoint:
    """Non-generating branch of the unseeded system, in closed form.

    a1 = -i*Omega1/(gamma1 + i*d_omega1), a2 = b = 0, so the pump intensity
    responds linearly: |a1|^2 = Omega1^2/(gamma1^2 + d_omega1^2).
    """
    if drive.seed_amp != 0.0:
        raise ValueError("analytic low branch requires a zero seed amplitude")
    a1 = -1j * drive.pump_amp / (sys.gamma1 + 1j * det.d_omega1)
    st = ModeState(a1, 0j, 0j)
    r = residual(st, sys, det, drive)
    return FixedPoint(st, float(np.sqrt(r @ r)), "low", True)


def _corotating_residual(x7, sys, det, drive):
    """Residual of the nu-augmented system plus the Im(b) gauge row."""
    st = _x_to_state(x7[:6])
    nu = x7[6]
    shifted = Detunings(d_omega1=det.d_omega1, delta2=det.delta2 - nu,
                        d_omega_b=det.d_omega_b + nu, d_omega2=det.d_omega2)
    r6 = residual(st, sys, shifted, drive)
    return np.concatenate([r6, [x7[5]]])


def _corotating_jacobian(x7, sys, det):
    st = _x_to_state(x7[:6])
    nu = x7[6]
    j = np.zeros((7, 7))
    j[:6, :6] = jacobian_corotating(st, sys, det, nu)
    # d/d nu of (+i nu a2) and (-i nu b) terms
    j[2, 6] = -st.a2.imag
    j[3, 6] = st.a2.real
    j[4, 6] = st.b.imag
    j[5, 6] = -st.b.real
    j[6, 5] = 1.0
    return j


def solve_corotating(guess: ModeState, sys: SystemParams, det: Detunings,
                     drive: DriveParams, tol: float = 1e-10,
                     max_iter: int = 60, nu_guess: float | None = None) -> FixedPoint:
    """Newton for the phase-free generating branch of the unseeded system.

    Solves for (state, nu) with the gauge pinned by Im(b) = 0, b >= 0.  Only
    meaningful when the seed amplitude is zero; a seeded system pins the
    phase by itself and plain :func:`newton_solve` applies.
    """
    if drive.seed_amp != 0.0:
        raise ValueError("co-rotating solve applies to the unseeded system")
    if nu_guess is None:
        # frequency-pulling compromise of the a2/b pair, weighted by linewidths
        nu_guess = -sys.gamma2 * det.d_omega_b / (sys.gamma2 + sys.gamma_b)
    # rotate the guess into the gauge section Im(b) = 0, b >= 0
    b = complex(guess.b)
    if b != 0:
        ph = b / abs(b)
        guess = ModeState(guess.a1, guess.a2 * ph, guess.b / ph)
    x = np.concatenate([_state_to_x(guess), [float(nu_guess)]])
    r = _corotating_residual(x, sys, det, drive)
    rn = float(np.sqrt(r @ r))
    n_it = 0
    for n_it in range(max_iter):
        if rn <= tol * _tol_scale(x[:6], sys, det):
            break
        j = _corotating_jacobian(x, sys, det)
        try:
            dx = np.linalg.solve(j, -r)
        except np.linalg.LinAlgError:
            return FixedPoint(_x_to_state(x[:6]), rn, "unresolved", False, x[6])
        if not np.all(np.isfinite(dx)):
            return FixedPoint(_x_to_state(x[:6]), rn, "unresolved", False, x[6])
        lam = 1.0
        for _ in range(20):
            xt = x + lam * dx
            rt = _corotating_residual(xt, sys, det, drive)
            rtn = float(np.sqrt(rt @ rt))
            if np.isfinite(rtn) and rtn < rn:
                x, r, rn = xt, rt, rtn
                break
            lam *= 0.5
        else:
            return FixedPoint(_x_to_state(x[:6]), rn, "unresolved", False, x[6])
    else:
        return FixedPoint(_x_to_state(x[:6]), rn, "unresolved", False, x[6])
    # keep b on the nonnegative real axis (gauge representative)
    if x[4] < 0:
        x[2], x[3], x[4], x[5] = -x[2], -x[3], -x[4], -x[5]
    st = _x_to_state(x[:6])
    return FixedPoint(st, rn, _label(st, sys, det), True, float(x[6]), n_it)


def high_branch_from_settle(sys: SystemParams, det: Detunings, omega1: float,
                            seed_amp: float = 0.0,
                            cfg: IntegratorConfig | None = None,
                            kick_rel: float = 1e-8,
                            tol: float = 1e-10) -> FixedPoint:
    """Generating-branch point seeded by a settled integration at omega1.

    The integration starts from a small kick off the origin so that the
    generating attractor is reachable; the settled state then seeds Newton
    (the nu-augmented variant when the seed amplitude is zero).
    """
    cfg = cfg or IntegratorConfig(rel_tol=3e-13, abs_tol=1e-12)
    drive = DriveParams(omega1, seed_amp)
    a1lin = abs(drive.pump_amp) / math.hypot(sys.gamma1, det.d_omega1)
    kick = kick_rel * max(a1lin, 1.0)
    st, _ok = settle(RotatingRHS(sys, det, drive),
                     ModeState(0j, kick + 0j, kick + 0j), cfg)
    if seed_amp == 0.0:
        return solve_corotating(st, sys, det, drive, tol=tol)
    return newton_solve(st, sys, det, drive, tol=tol)


@dataclass(frozen=True)
class StepControl:
    """Arclength step policy for :func:`continue_branch`."""

    ds0: float
    ds_min: float
    ds_max: float
    grow: float = 1.4
    shrink: float = 0.5
    max_points: int = 4000

    def __post_init__(self):
        if not (0 < self.ds_min <= self.ds0 <= self.ds_max):
            raise ValueError("need 0 < ds_min <= ds0 <= ds_max")


@dataclass
class BranchCurve:
    """Ordered continuation samples along one solution branch."""

    omega1: list = field(default_factory=list)
    points: list = field(default_factory=list)
    turning_points: list = field(default_factory=list)
    truncated: bool = False

    def append(self, omega1: float, fp: FixedPoint) -> None:
        self.omega1.append(float(omega1))
        self.points.append(fp)

    def __len__(self):
        return len(self.points)

    def to_csv(self, path_or_file) -> None:
        close = False
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            f = open(path_or_file, "w", newline="")
            close = True
        else:
            f = path_or_file
        try:
            f.write("Omega1,re_a1,im_a1,re_a2,im_a2,re_b,im_b,"
                    "I1,I2,Ib,branch,residual_norm,nu\n")
            for o1, fp in zip(self.omega1, self.points):
                s = fp.state
                i1, i2, ib = fp.intensities
                f.write("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                        "%.17g,%.17g,%.17g,%s,%.17g,%.17g\n"
                        % (o1, s.a1.real, s.a1.imag, s.a2.real, s.a2.imag,
                           s.b.real, s.b.imag, i1, i2, ib, fp.branch,
                           fp.residual_norm, fp.nu))
        finally:
            if close:
                f.close()


def _extended_residual(u, sys, det, drive_template, augmented):
    """F(u) without the arclength row.  u = (x6 [, nu], Omega1)."""
    o1 = u[-1]
    drive = drive_template.replace_amps(pump_amp=abs(o1))
    if augmented:
        return _corotating_residual(np.concatenate([u[:6], [u[6]]]),
                                    sys, det, drive)
    return residual(_x_to_state(u[:6]), sys, det, drive)


def _extended_jacobian(u, sys, det, drive_template, augmented):
    """Jacobian of :func:`_extended_residual` including the d/dOmega1 column."""
    n = len(u)
    m = n - 1
    jac = np.zeros((m, n))
    if augmented:
        jac[:7, :7] = _corotating_jacobian(np.concatenate([u[:6], [u[6]]]),
                                           sys, det)
    else:
        jac[:6, :6] = jacobian(_x_to_state(u[:6]), sys, det)
    # d residual / d Omega1: only the -i*Omega1 drive in the a1 row
    jac[1, -1] = -1.0 if u[-1] >= 0 else 1.0
    return jac


def continue_branch(start: FixedPoint, sys: SystemParams, det: Detunings,
                    drive_template: DriveParams, omega_range, step: StepControl,
                    start_omega1: float | None = None, direction: int = +1,
                    tol: float = 1e-10) -> BranchCurve:
    """Pseudo-arclength continuation of a branch in the pump amplitude.

    The seed amplitude is held at drive_template.seed_amp.  For the unseeded
    generating branch (nonzero b) the co-rotation frequency rides along as an
    extra unknown with the Im(b) = 0 gauge row.  Turning points are recorded
    where the Omega1 component of the tangent changes sign; the curve stops
    when Omega1 leaves omega_range, max_points is hit, or the step size
    underflows (then truncated = True).
    """
    if not start.converged:
        raise ValueError("continuation must start from a converged point")
    lo, hi = float(omega_range[0]), float(omega_range[1])
    if start_omega1 is None:
        start_omega1 = drive_template.pump_amp
    augmented = (drive_template.seed_amp == 0.0
                 and abs(start.state.b) > 0.0)

    # arclength scales: amplitudes and Omega1 live on wildly different
    # magnitudes, so normalize the tangent with a characteristic amplitude
    # and pump scale
    amp_scale = max(start.state.norm(), 1.0)
    om_scale = max(abs(start_omega1), abs(hi), abs(lo), 1.0)
    rate = max(sys.rate_scale(), det.rate_scale(), abs(sys.g), 1e-300)

    if augmented:
        u = np.concatenate([_state_to_x(start.state),
                            [start.nu, float(start_omega1)]])
        weights = np.concatenate([np.full(6, 1.0 / amp_scale),
                                  [1.0 / rate, 1.0 / om_scale]])
    else:
        u = np.concatenate([_state_to_x(start.state), [float(start_omega1)]])
        weights = np.concatenate([np.full(6, 1.0 / amp_scale), [1.0 / om_scale]])

    n = len(u)

    def tangent(u, t_prev):
        jac = _extended_jacobian(u, sys, det, drive_template, augmented)
        m = np.vstack([jac, t_prev * weights ** 2])
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        try:
            t = np.linalg.solve(m, rhs)
        except np.linalg.LinAlgError:
            return None
        norm = math.sqrt(float((t * weights) @ (t * weights)))
        if norm == 0 or not np.isfinite(norm):
            return None
        return t / norm

    curve = BranchCurve()
    fp0 = FixedPoint(start.state, start.residual_norm, start.branch, True,
                     start.nu)
    curve.append(start_omega1, fp0)

    # initial tangent: previous-tangent row replaced by the Omega1 direction
    t_prev = np.zeros(n)
    t_prev[-1] = float(direction)
    t = tangent(u, t_prev)
    if t is None:
        curve.truncated = True
        return curve
    if direction * t[-1] < 0:
        t = -t
    ds = step.ds0
    last_sign = math.copysign(1.0, t[-1]) if t[-1] != 0 else 0.0

    while len(curve) < step.max_points:
        accepted = False
        while ds >= step.ds_min:
            u_pred = u + ds * t
            uc = u_pred.copy()
            ok = False
            for _ in range(30):
                r = _extended_residual(uc, sys, det, drive_template, augmented)
                arc = float(((uc - u_pred) * weights ** 2) @ t)
                g = np.concatenate([r, [arc]])
                rn = float(np.sqrt(r @ r))
                if rn <= tol * _tol_scale(uc[:6], sys, det) and abs(arc) <= 1e-10 * ds + 1e-14:
                    ok = True
                    break
                jac = _extended_jacobian(uc, sys, det, drive_template, augmented)
                m = np.vstack([jac, t * weights ** 2])
                try:
                    du = np.linalg.solve(m, -g)
                except np.linalg.LinAlgError:
                    break
                if not np.all(np.isfinite(du)):
                    break
                uc = uc + du
            if ok:
                accepted = True
                break
            ds *= step.shrink
        if not accepted:
            curve.truncated = True
            break

        u = uc
        t_new = tangent(u, t)
        if t_new is None:
            curve.truncated = True
            break
        if t_new @ (t * weights ** 2) < 0:
            t_new = -t_new
        t = t_new

        o1 = float(u[-1])
        st = _x_to_state(u[:6])
        if augmented and u[4] < 0:
            # re-enter the gauge section with b >= 0
            u[2], u[3], u[4], u[5] = -u[2], -u[3], -u[4], -u[5]
            st = _x_to_state(u[:6])
        r6 = _extended_residual(u, sys, det, drive_template, augmented)
        rn = float(np.sqrt(r6 @ r6))
        nu = float(u[6]) if augmented else 0.0
        curve.append(o1, FixedPoint(st, rn, _label(st, sys, det), True, nu))

        sign = math.copysign(1.0, t[-1]) if t[-1] != 0 else last_sign
        if last_sign != 0 and sign != last_sign:
            curve.turning_points.append(o1)
        last_sign = sign

        if not (lo <= o1 <= hi):
            break
        ds = min(ds * step.grow, step.ds_max)

    return curve
