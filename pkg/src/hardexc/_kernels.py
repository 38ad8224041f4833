"""Compiled inner loops for the adaptive Runge-Kutta integrator.

Dormand-Prince 5(4) embedded pair with FSAL, fixed coefficients, on the
three complex mode amplitudes.  Everything here is deterministic: no
randomness, no fastmath, plain IEEE double arithmetic, so identical inputs
give bit-identical trajectories on a given build.
"""

import numpy as np
from numba import njit

FRAME_ROTATING = 0
FRAME_LAB = 1

REASON_MAXTIME = 0
REASON_STEADY = 1
REASON_MAXSTEPS = 2
REASON_OVERFLOW = 3
REASON_DT_UNDERFLOW = 4

AMPLITUDE_LIMIT = 1e30

# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# b (5th order) minus b-hat (4th order); includes the FSAL stage
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0


@njit(cache=True)
def rhs(frame, t, y, p, out):
    """Derivative of (a1, a2, b).  p = [g1, g2, gb, f1, f2, fb, g, O1, O2, wp, ws];
    in the rotating frame f* are detunings and the drives are static, in the
    lab frame f* are absolute frequencies and the drives carry phase factors."""
    a1 = y[0]
    a2 = y[1]
    b = y[2]
    if frame == FRAME_ROTATING:
        d1 = -1j * p[7]
        d2 = -1j * p[8]
    else:
        d1 = -1j * p[7] * np.exp(-1j * p[9] * t)
        d2 = -1j * p[8] * np.exp(-1j * p[10] * t)
    out[0] = (-p[0] - 1j * p[3]) * a1 - 1j * p[6] * a2 * b + d1
    out[1] = (-p[1] - 1j * p[4]) * a2 - 1j * p[6] * a1 * np.conj(b) + d2
    out[2] = (-p[2] - 1j * p[5]) * b - 1j * p[6] * a1 * np.conj(a2)


@njit(cache=True)
def integrate_core(frame, y0, t0, t_end, p, rtol, atol, dt0, dt_max,
                   max_steps, steady_window, steady_eps, steady_floor,
                   rec_cap):
    """Adaptive DP5(4) march from t0 to t_end.

    Steady-state detection: over consecutive windows of length steady_window,
    terminate when max-min of every |amplitude|^2 within a completed window
    is below steady_eps * (window max) + steady_floor.  A non-positive
    steady_window disables the check.

    Returns (reason, n_rec, rec_t, rec_y, n_accept, n_reject, t, y, dt).
    """
    y = y0.copy()
    k1 = np.empty(3, np.complex128)
    k2 = np.empty(3, np.complex128)
    k3 = np.empty(3, np.complex128)
    k4 = np.empty(3, np.complex128)
    k5 = np.empty(3, np.complex128)
    k6 = np.empty(3, np.complex128)
    k7 = np.empty(3, np.complex128)
    ytmp = np.empty(3, np.complex128)
    ynew = np.empty(3, np.complex128)

    rec_t = np.empty(rec_cap, np.float64)
    rec_y = np.empty((rec_cap, 3), np.complex128)
    n_rec = 0
    rec_stride = 1
    acc_count = 0

    t = t0
    dt = dt0
    n_accept = 0
    n_reject = 0
    reason = REASON_MAXTIME

    # record the initial point
    rec_t[0] = t
    rec_y[0, 0] = y[0]
    rec_y[0, 1] = y[1]
    rec_y[0, 2] = y[2]
    n_rec = 1

    for i in range(3):
        if abs(y[i]) > AMPLITUDE_LIMIT:
            return (REASON_OVERFLOW, n_rec, rec_t, rec_y, 0, 0, t, y, dt)

    # steady-state window bookkeeping
    have_steady = steady_window > 0.0
    w_end = t0 + steady_window
    wmin0 = abs(y[0]) ** 2
    wmax0 = wmin0
    wmin1 = abs(y[1]) ** 2
    wmax1 = wmin1
    wmin2 = abs(y[2]) ** 2
    wmax2 = wmin2

    rhs(frame, t, y, p, k1)

    steps = 0
    while t < t_end:
        if steps >= max_steps:
            reason = REASON_MAXSTEPS
            break
        steps += 1

        if dt > t_end - t:
            dt = t_end - t
        if dt <= 16.0 * 2.220446049250313e-16 * max(abs(t), abs(t_end - t0) * 1e-12):
            reason = REASON_DT_UNDERFLOW
            break

        # stages
        for i in range(3):
            ytmp[i] = y[i] + dt * _A21 * k1[i]
        rhs(frame, t + _C2 * dt, ytmp, p, k2)
        for i in range(3):
            ytmp[i] = y[i] + dt * (_A31 * k1[i] + _A32 * k2[i])
        rhs(frame, t + _C3 * dt, ytmp, p, k3)
        for i in range(3):
            ytmp[i] = y[i] + dt * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        rhs(frame, t + _C4 * dt, ytmp, p, k4)
        for i in range(3):
            ytmp[i] = y[i] + dt * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i]
                                   + _A54 * k4[i])
        rhs(frame, t + _C5 * dt, ytmp, p, k5)
        for i in range(3):
            ytmp[i] = y[i] + dt * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                   + _A64 * k4[i] + _A65 * k5[i])
        rhs(frame, t + dt, ytmp, p, k6)
        for i in range(3):
            ynew[i] = y[i] + dt * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                                   + _B5 * k5[i] + _B6 * k6[i])
        rhs(frame, t + dt, ynew, p, k7)

        # scaled RMS error over the three complex components
        errsq = 0.0
        bad = False
        for i in range(3):
            e = dt * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                      + _E6 * k6[i] + _E7 * k7[i])
            ay = abs(y[i])
            an = abs(ynew[i])
            sc = atol + rtol * (ay if ay > an else an)
            ee = abs(e)
            if not np.isfinite(ee):
                bad = True
                break
            errsq += (ee / sc) * (ee / sc)
        err = np.sqrt(errsq / 3.0)

        if bad:
            # treat like a failed step with maximal shrink
            dt *= 0.2
            n_reject += 1
            continue

        if err <= 1.0:
            # accept
            t = t + dt
            for i in range(3):
                y[i] = ynew[i]
                k1[i] = k7[i]
            n_accept += 1
            acc_count += 1

            # record (stride-decimated, capacity-doubling)
            if acc_count % rec_stride == 0:
                if n_rec == rec_cap:
                    half = rec_cap // 2
                    for j in range(half):
                        rec_t[j] = rec_t[2 * j]
                        rec_y[j, 0] = rec_y[2 * j, 0]
                        rec_y[j, 1] = rec_y[2 * j, 1]
                        rec_y[j, 2] = rec_y[2 * j, 2]
                    n_rec = half
                    rec_stride *= 2
                if acc_count % rec_stride == 0:
                    rec_t[n_rec] = t
                    rec_y[n_rec, 0] = y[0]
                    rec_y[n_rec, 1] = y[1]
                    rec_y[n_rec, 2] = y[2]
                    n_rec += 1

            over = False
            for i in range(3):
                if abs(y[i]) > AMPLITUDE_LIMIT:
                    over = True
            if over:
                reason = REASON_OVERFLOW
                break

            if have_steady:
                i0 = abs(y[0]) ** 2
                i1 = abs(y[1]) ** 2
                i2 = abs(y[2]) ** 2
                if i0 < wmin0:
                    wmin0 = i0
                if i0 > wmax0:
                    wmax0 = i0
                if i1 < wmin1:
                    wmin1 = i1
                if i1 > wmax1:
                    wmax1 = i1
                if i2 < wmin2:
                    wmin2 = i2
                if i2 > wmax2:
                    wmax2 = i2
                if t >= w_end:
                    if ((wmax0 - wmin0) <= steady_eps * wmax0 + steady_floor
                            and (wmax1 - wmin1) <= steady_eps * wmax1 + steady_floor
                            and (wmax2 - wmin2) <= steady_eps * wmax2 + steady_floor):
                        reason = REASON_STEADY
                        break
                    w_end = t + steady_window
                    wmin0 = i0
                    wmax0 = i0
                    wmin1 = i1
                    wmax1 = i1
                    wmin2 = i2
                    wmax2 = i2
        else:
            n_reject += 1

        # step-size controller
        if err <= 1e-30:
            fac = 5.0
        else:
            fac = 0.9 * err ** -0.2
            if fac > 5.0:
                fac = 5.0
            elif fac < 0.2:
                fac = 0.2
        dt = dt * fac
        if dt > dt_max:
            dt = dt_max

    # force-record the final state
    if n_rec > 0 and t > rec_t[n_rec - 1]:
        if n_rec == rec_cap:
            half = rec_cap // 2
            for j in range(half):
                rec_t[j] = rec_t[2 * j]
                rec_y[j, 0] = rec_y[2 * j, 0]
                rec_y[j, 1] = rec_y[2 * j, 1]
                rec_y[j, 2] = rec_y[2 * j, 2]
            n_rec = half
            rec_stride *= 2
        rec_t[n_rec] = t
        rec_y[n_rec, 0] = y[0]
        rec_y[n_rec, 1] = y[1]
        rec_y[n_rec, 2] = y[2]
        n_rec += 1

    return (reason, n_rec, rec_t, rec_y, n_accept, n_reject, t, y, dt)
