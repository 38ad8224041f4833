import io
import math

import numpy as np
import pytest

import hardexc as hx
from hardexc import steady
from hardexc.integrate import StiffnessError


def decay_rhs(gamma1=1.0, d_omega1=0.0):
    sys = hx.SystemParams(gamma1=gamma1, gamma2=1.0, gamma_b=1.0, g=0.0)
    det = hx.Detunings.from_values(d_omega1)
    return hx.RotatingRHS(sys, det, hx.DriveParams(0.0, 0.0))


def test_pure_decay_matches_exact_exponential():
    rhs = decay_rhs()
    cfg = hx.IntegratorConfig(rel_tol=1e-10, abs_tol=1e-14, steady_window=0.0)
    traj = hx.integrate(rhs, hx.ModeState(1.0, 0j, 0j), 1.0, cfg)
    assert traj.reason == "maxTime"
    exact = math.exp(-2.0)
    assert abs(traj.intensities[-1, 0] - exact) <= 1e-8 * exact


def test_halving_tolerances_never_increases_error():
    rhs = decay_rhs(d_omega1=3.0)
    s0 = hx.ModeState(1.0 + 0.5j, 0j, 0j)
    exact = (1.0 + 0.5j) * np.exp((-1.0 - 3.0j) * 2.0)
    errs = []
    tol = 1e-6
    for _ in range(7):
        cfg = hx.IntegratorConfig(rel_tol=tol, abs_tol=tol * 1e-3,
                                  steady_window=0.0)
        traj = hx.integrate(rhs, s0, 2.0, cfg)
        errs.append(abs(traj.states[-1][0] - exact))
        tol /= 2.0
    for a, b in zip(errs, errs[1:]):
        assert b <= a * 1.0 + 1e-16


def test_fixed_step_convergence_order_at_least_four():
    rhs = decay_rhs(d_omega1=3.0)
    s0 = hx.ModeState(1.0, 0j, 0j)
    exact = np.exp((-1.0 - 3.0j) * 2.0)
    errs = []
    for h in (0.02, 0.01):
        cfg = hx.IntegratorConfig(rel_tol=1e6, abs_tol=1e6, dt_init=h,
                                  dt_max=h, steady_window=0.0)
        traj = hx.integrate(rhs, s0, 2.0, cfg)
        errs.append(abs(traj.states[-1][0] - exact))
    order = math.log2(errs[0] / errs[1])
    assert order >= 4.0


def test_integration_is_bit_deterministic():
    rhs = decay_rhs(d_omega1=7.0)
    cfg = hx.IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12)
    a = hx.integrate(rhs, hx.ModeState(1.0, 0.5j, 0.25), 5.0, cfg)
    b = hx.integrate(rhs, hx.ModeState(1.0, 0.5j, 0.25), 5.0, cfg)
    assert np.array_equal(a.t, b.t)
    assert np.array_equal(a.states, b.states)
    assert a.n_accept == b.n_accept and a.n_reject == b.n_reject


def test_trajectory_samples_are_strictly_increasing_with_decimation():
    rhs = decay_rhs(d_omega1=40.0)
    cfg = hx.IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, record_cap=64,
                              steady_window=0.0)
    traj = hx.integrate(rhs, hx.ModeState(1.0, 1.0, 1.0), 20.0, cfg)
    assert traj.n_accept > 64          # decimation exercised
    assert len(traj.t) <= 64
    assert np.all(np.diff(traj.t) > 0)
    assert traj.t[-1] == 20.0
    assert np.array_equal(traj.intensities,
                          traj.states.real ** 2 + traj.states.imag ** 2)


def test_settle_at_origin_undriven():
    rhs = decay_rhs()
    cfg = hx.IntegratorConfig()
    st, ok = hx.settle(rhs, hx.ORIGIN, cfg)
    assert ok and st.norm() == 0.0


def test_settle_from_arbitrary_state_undriven_reaches_origin():
    rhs = decay_rhs(d_omega1=5.0)
    cfg = hx.IntegratorConfig(rel_tol=1e-10, abs_tol=1e-10)
    st, ok = hx.settle(rhs, hx.ModeState(2.0, -1j, 0.5 + 0.5j), cfg)
    assert ok
    assert all(i < cfg.abs_tol for i in st.intensities)


def test_below_threshold_cold_start_stays_on_low_branch(cheap_sys, cheap_det,
                                                        cheap_thresholds,
                                                        tight_cfg):
    o1 = 0.5 * cheap_thresholds.omega_th
    drive = hx.DriveParams(o1, 0.0)
    rhs = hx.RotatingRHS(cheap_sys, cheap_det, drive)
    kick = 1e-8 * o1 / math.hypot(cheap_sys.gamma1, cheap_det.d_omega1)
    st, ok = hx.settle(rhs, hx.ModeState(0j, kick, kick), tight_cfg,
                       t_cap=2e3 / cheap_sys.gamma_min)
    assert ok
    i1, i2, ib = st.intensities
    assert i2 < 1e-6 * i1 and ib < 1e-6 * i1
    ref = steady.analytic_low_branch(cheap_sys, cheap_det, drive)
    assert i1 == pytest.approx(ref.intensities[0], rel=1e-8)


def test_above_threshold_cold_start_settles_onto_generating_state(
        cheap_sys, cheap_det, cheap_thresholds, tight_cfg):
    o1 = 1.1 * cheap_thresholds.omega_th
    drive = hx.DriveParams(o1, 0.0)
    rhs = hx.RotatingRHS(cheap_sys, cheap_det, drive)
    kick = 1e-8 * o1 / math.hypot(cheap_sys.gamma1, cheap_det.d_omega1)
    st, ok = hx.settle(rhs, hx.ModeState(0j, kick, kick), tight_cfg,
                       t_cap=2e3 / cheap_sys.gamma_min)
    assert ok
    fp = steady.solve_corotating(st, cheap_sys, cheap_det, drive)
    assert fp.converged and fp.branch == "high"
    for a, b in zip(st.intensities, fp.intensities):
        assert a == pytest.approx(b, rel=1e-6)


def test_settled_state_has_small_stationarity_defect(cheap_sys, cheap_det,
                                                     cheap_thresholds,
                                                     tight_cfg):
    # seeded system: the settled state is a genuine fixed point
    drive = hx.DriveParams(0.5 * cheap_thresholds.omega_th,
                           0.05 * cheap_thresholds.omega_th)
    rhs = hx.RotatingRHS(cheap_sys, cheap_det, drive)
    st, ok = hx.settle(rhs, hx.ORIGIN, tight_cfg,
                       t_cap=2e3 / cheap_sys.gamma_min)
    assert ok
    r = steady.residual(st, cheap_sys, cheap_det, drive)
    rate = max(cheap_sys.rate_scale(), cheap_det.rate_scale())
    bound = 10 * tight_cfg.steady_eps * rate * st.norm()
    assert math.sqrt(float(r @ r)) <= bound


def test_overflow_from_oversized_initial_state():
    rhs = decay_rhs()
    cfg = hx.IntegratorConfig()
    traj = hx.integrate(rhs, hx.ModeState(2e30, 0j, 0j), 1.0, cfg)
    assert traj.reason == "overflow"


def test_overflow_from_growth_is_labeled_not_raised():
    sys = hx.SystemParams(gamma1=1.0, gamma2=1.0, gamma_b=1.0, g=0.0)
    det = hx.Detunings.from_values(0.0)
    rhs = hx.RotatingRHS(sys, det, hx.DriveParams(1e31, 0.0))
    cfg = hx.IntegratorConfig(rel_tol=1e-8, abs_tol=1.0, steady_window=0.0)
    traj = hx.integrate(rhs, hx.ORIGIN, 1.0, cfg)
    assert traj.reason == "overflow"
    assert np.abs(traj.states[-1]).max() > 1e30
    assert traj.final_time < 1.0


def test_step_underflow_raises_stiffness_error():
    rhs = decay_rhs(d_omega1=1.0)
    cfg = hx.IntegratorConfig(rel_tol=1e-300, abs_tol=1e-300,
                              steady_window=0.0)
    with pytest.raises(StiffnessError):
        hx.integrate(rhs, hx.ModeState(1.0, 0j, 0j), 1.0, cfg)


def test_max_steps_termination_is_labeled():
    rhs = decay_rhs(d_omega1=50.0)
    cfg = hx.IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, max_steps=50,
                              steady_window=0.0)
    traj = hx.integrate(rhs, hx.ModeState(1.0, 1.0, 1.0), 100.0, cfg)
    assert traj.reason == "maxSteps"


def test_settle_needs_cap_when_undamped():
    sys = hx.SystemParams(gamma1=0.0, gamma2=0.0, gamma_b=0.0, g=0.1)
    det = hx.Detunings.from_values(1.0)
    rhs = hx.RotatingRHS(sys, det, hx.DriveParams(0.0, 0.0))
    with pytest.raises(ValueError, match="t_cap"):
        hx.settle(rhs, hx.ORIGIN, hx.IntegratorConfig())


def test_trajectory_csv_format():
    rhs = decay_rhs()
    cfg = hx.IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10, steady_window=0.0)
    traj = hx.integrate(rhs, hx.ModeState(1.0, 0.5j, 0.25), 0.5, cfg)
    buf = io.StringIO()
    traj.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,re_a1,im_a1,re_a2,im_a2,re_b,im_b,I1,I2,Ib"
    assert len(lines) == len(traj.t) + 1
    first = [float(x) for x in lines[1].split(",")]
    assert first[0] == 0.0 and first[1] == 1.0 and first[4] == 0.5
    assert first[7] == 1.0 and first[8] == 0.25


def test_invalid_configs_rejected():
    with pytest.raises(ValueError):
        hx.IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        hx.IntegratorConfig(abs_tol=-1.0)
    with pytest.raises(ValueError):
        hx.IntegratorConfig(max_steps=0)
    with pytest.raises(ValueError):
        hx.IntegratorConfig(steady_eps=0.0)
    rhs = decay_rhs()
    with pytest.raises(ValueError, match="t_end"):
        hx.integrate(rhs, hx.ORIGIN, -1.0, hx.IntegratorConfig())
