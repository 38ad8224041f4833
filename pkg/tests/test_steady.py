import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import hardexc as hx
from hardexc import steady
from hardexc.model import gauge_rotate
from hardexc.steady import (BranchCurve, StepControl, analytic_low_branch,
                            continue_branch, high_branch_from_settle,
                            newton_solve, residual, solve_corotating)


def scale_of(sys, det, state):
    rate = max(sys.rate_scale(), det.rate_scale(), abs(sys.g))
    return 1.0 + state.norm() * rate


# --- residual ----------------------------------------------------------------

def test_residual_layout_pump_only(cheap_sys, cheap_det):
    r = residual(hx.ORIGIN, cheap_sys, cheap_det, hx.DriveParams(7.5, 0.0))
    assert np.array_equal(r, [0.0, -7.5, 0.0, 0.0, 0.0, 0.0])


def test_residual_zero_when_undriven_at_origin(cheap_sys, cheap_det):
    r = residual(hx.ORIGIN, cheap_sys, cheap_det, hx.DriveParams(0.0, 0.0))
    assert np.array_equal(r, np.zeros(6))


def test_residual_vanishes_on_zero_branch(prod_sys, prod_det):
    drive = hx.DriveParams(3e15, 0.0)
    fp = analytic_low_branch(prod_sys, prod_det, drive)
    r = residual(fp.state, prod_sys, prod_det, drive)
    assert np.sqrt(r @ r) <= 1e-12 * drive.pump_amp


# --- newton ------------------------------------------------------------------

def test_newton_started_at_root_converges_immediately(cheap_sys, cheap_det,
                                                      cheap_thresholds):
    drive = hx.DriveParams(0.4 * cheap_thresholds.omega_th, 0.0)
    fp0 = analytic_low_branch(cheap_sys, cheap_det, drive)
    fp = newton_solve(fp0.state, cheap_sys, cheap_det, drive)
    assert fp.converged and fp.iterations <= 2
    assert abs(fp.state.a1 - fp0.state.a1) <= 1e-12 * abs(fp0.state.a1)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=15)
def test_newton_from_random_guess_undriven_finds_origin(seed):
    rng = np.random.default_rng(seed)
    sys = hx.SystemParams(gamma1=1.0, gamma2=1.0, gamma_b=6.0, g=1e-3)
    det = hx.Detunings.from_values(-30.0)
    z = rng.normal(size=6) * 10.0
    guess = hx.ModeState(complex(z[0], z[1]), complex(z[2], z[3]),
                         complex(z[4], z[5]))
    fp = newton_solve(guess, sys, det, hx.DriveParams(0.0, 0.0))
    assert fp.converged
    assert fp.state.norm() <= 1e-8 * max(1.0, guess.norm())


def test_converged_residual_obeys_tolerance_contract(cheap_sys, cheap_det,
                                                     cheap_thresholds):
    tol = 1e-10
    for o1_frac, o2_frac in ((0.3, 0.0), (0.7, 0.05), (0.9, 0.02)):
        drive = hx.DriveParams(o1_frac * cheap_thresholds.omega_th,
                               o2_frac * cheap_thresholds.omega_th)
        guess = hx.ModeState(0j, -1j * drive.seed_amp / cheap_sys.gamma2, 0j) \
            if drive.seed_amp else analytic_low_branch(cheap_sys, cheap_det,
                                                       drive).state
        fp = newton_solve(guess, cheap_sys, cheap_det, drive, tol=tol)
        assert fp.converged
        assert fp.residual_norm <= tol * scale_of(cheap_sys, cheap_det,
                                                  fp.state)


def test_high_branch_from_settled_integration(cheap_sys, cheap_det,
                                              cheap_thresholds, tight_cfg):
    """Integrator-as-oracle: a settled generating state seeds Newton, which
    re-converges to a nearby point on the generating branch."""
    o1 = 0.6 * cheap_thresholds.omega_th      # inside the bistable window
    fp = high_branch_from_settle(cheap_sys, cheap_det, o1, cfg=tight_cfg)
    assert fp.converged and fp.branch == "high"
    i1, i2, ib = fp.intensities
    assert i2 > 0 and ib > 0
    # oracle agreement: settle() initialized at the point stays put
    drive = hx.DriveParams(o1, 0.0)
    rhs = hx.RotatingRHS(cheap_sys, cheap_det, drive)
    st, ok = hx.settle(rhs, fp.state, tight_cfg,
                       t_cap=2e3 / cheap_sys.gamma_min)
    assert ok
    for a, b in zip(st.intensities, fp.intensities):
        assert a == pytest.approx(b, rel=1e-8, abs=1e-12)


def test_corotating_rotation_frequency_is_reproducible(cheap_sys, cheap_det,
                                                       cheap_thresholds,
                                                       tight_cfg):
    fp1 = high_branch_from_settle(cheap_sys, cheap_det,
                                  0.8 * cheap_thresholds.omega_th,
                                  cfg=tight_cfg)
    fp2 = high_branch_from_settle(cheap_sys, cheap_det,
                                  0.9 * cheap_thresholds.omega_th,
                                  cfg=tight_cfg)
    assert fp1.converged and fp2.converged
    # the pulled frequency varies smoothly and stays of one sign
    assert fp1.nu * fp2.nu > 0
    assert fp1.state.b.imag == 0.0 and fp1.state.b.real >= 0.0


def test_solve_corotating_rejects_seeded_drive(cheap_sys, cheap_det):
    with pytest.raises(ValueError, match="unseeded"):
        solve_corotating(hx.ModeState(1.0, 1.0, 1.0), cheap_sys, cheap_det,
                         hx.DriveParams(1.0, 0.5))


# --- analytic low branch -----------------------------------------------------

def test_analytic_low_branch_at_zero_drive(cheap_sys, cheap_det):
    fp = analytic_low_branch(cheap_sys, cheap_det, hx.DriveParams(0.0, 0.0))
    assert fp.state.norm() == 0.0 and fp.converged


def test_analytic_low_branch_resonant_response():
    sys = hx.SystemParams(gamma1=1.0, gamma2=1.0, gamma_b=1.0, g=0.1)
    det = hx.Detunings.from_values(0.0)
    fp = analytic_low_branch(sys, det, hx.DriveParams(1.0, 0.0))
    assert fp.state.a1 == -1j
    assert fp.intensities[0] == 1.0


def test_analytic_low_branch_requires_zero_seed(cheap_sys, cheap_det):
    with pytest.raises(ValueError, match="zero seed"):
        analytic_low_branch(cheap_sys, cheap_det, hx.DriveParams(1.0, 0.1))


def test_analytic_low_branch_closure_with_residual(prod_sys, prod_det):
    for o1 in (1e13, 1e15, 5e16):
        fp = analytic_low_branch(prod_sys, prod_det, hx.DriveParams(o1, 0.0))
        assert fp.residual_norm <= 1e-12 * o1


# --- gauge symmetry ----------------------------------------------------------

@given(st.integers(0, 2 ** 32 - 1), st.floats(-math.pi, math.pi))
@settings(max_examples=25)
def test_residual_norm_is_gauge_invariant_without_seed(seed, phi):
    rng = np.random.default_rng(seed)
    sys = hx.SystemParams(gamma1=0.9, gamma2=1.3, gamma_b=4.0, g=2e-3)
    det = hx.Detunings.from_values(-17.0)
    drive = hx.DriveParams(5e4, 0.0)
    z = rng.normal(size=6) * 1e3
    state = hx.ModeState(complex(z[0], z[1]), complex(z[2], z[3]),
                         complex(z[4], z[5]))
    r0 = residual(state, sys, det, drive)
    r1 = residual(gauge_rotate(state, phi), sys, det, drive)
    n0, n1 = np.sqrt(r0 @ r0), np.sqrt(r1 @ r1)
    assert n1 == pytest.approx(n0, rel=1e-12)


def test_gauge_rotated_generating_state_still_stationary(cheap_sys, cheap_det,
                                                         cheap_thresholds,
                                                         tight_cfg):
    fp = high_branch_from_settle(cheap_sys, cheap_det,
                                 0.7 * cheap_thresholds.omega_th,
                                 cfg=tight_cfg)
    assert fp.converged
    drive = hx.DriveParams(0.7 * cheap_thresholds.omega_th, 0.0)
    for phi in (0.4, 1.9, -2.5):
        rot = gauge_rotate(fp.state, phi)
        fp2 = solve_corotating(rot, cheap_sys, cheap_det, drive,
                               nu_guess=fp.nu)
        assert fp2.converged
        for a, b in zip(fp2.intensities, fp.intensities):
            assert a == pytest.approx(b, rel=1e-9)
        assert fp2.nu == pytest.approx(fp.nu, rel=1e-9)


# --- continuation ------------------------------------------------------------

def test_low_branch_continuation_matches_closed_form(cheap_sys, cheap_det,
                                                     cheap_thresholds):
    o_th = cheap_thresholds.omega_th
    drive = hx.DriveParams(0.1 * o_th, 0.0)
    start = analytic_low_branch(cheap_sys, cheap_det, drive)
    ctl = StepControl(ds0=0.02, ds_min=1e-8, ds_max=0.05, max_points=300)
    cur = continue_branch(start, cheap_sys, cheap_det, drive,
                          (0.0, 0.9 * o_th), ctl, direction=+1)
    assert len(cur) > 20 and not cur.truncated and not cur.turning_points
    for o1, fp in zip(cur.omega1, cur.points):
        ref = analytic_low_branch(cheap_sys, cheap_det,
                                  hx.DriveParams(o1, 0.0))
        assert abs(fp.state.a1 - ref.state.a1) <= 1e-10 * abs(ref.state.a1)
        assert abs(fp.state.a2) <= 1e-10 and abs(fp.state.b) <= 1e-10


def test_high_branch_continues_down_to_fold_at_omega_ex(cheap_sys, cheap_det,
                                                        cheap_thresholds,
                                                        tight_cfg):
    o_th, o_ex = cheap_thresholds.omega_th, cheap_thresholds.omega_ex
    start = high_branch_from_settle(cheap_sys, cheap_det, 1.05 * o_th,
                                    cfg=tight_cfg)
    ctl = StepControl(ds0=0.02, ds_min=1e-9, ds_max=0.05, max_points=1500)
    cur = continue_branch(start, cheap_sys, cheap_det,
                          hx.DriveParams(1.05 * o_th, 0.0),
                          (0.5 * o_ex, 1.1 * o_th), ctl,
                          start_omega1=1.05 * o_th, direction=-1)
    assert cur.turning_points, "expected a fold"
    fold = cur.turning_points[0]
    assert abs(fold - o_ex) <= 0.01 * o_ex
    assert min(cur.omega1) >= 0.5 * o_ex


def test_middle_branch_reconnects_at_upper_threshold(cheap_sys, cheap_det,
                                                     cheap_thresholds,
                                                     tight_cfg):
    """Past the fold the continuation walks the unstable middle branch back
    up; its other end is the destabilization point of the non-generating
    branch."""
    o_th, o_ex = cheap_thresholds.omega_th, cheap_thresholds.omega_ex
    start = high_branch_from_settle(cheap_sys, cheap_det, 1.05 * o_th,
                                    cfg=tight_cfg)
    ctl = StepControl(ds0=0.02, ds_min=1e-9, ds_max=0.08, max_points=4000)
    cur = continue_branch(start, cheap_sys, cheap_det,
                          hx.DriveParams(1.05 * o_th, 0.0),
                          (0.5 * o_ex, 1.08 * o_th), ctl,
                          start_omega1=1.05 * o_th, direction=-1)
    assert len(cur.turning_points) >= 2
    assert abs(cur.turning_points[0] - o_ex) <= 0.01 * o_ex
    assert abs(cur.turning_points[1] - o_th) <= 0.01 * o_th


def test_seeded_low_branch_is_smooth_and_everywhere_nonzero(cheap_sys,
                                                            cheap_det,
                                                            cheap_thresholds):
    o_th = cheap_thresholds.omega_th
    o2 = 0.07 * o_th
    drive = hx.DriveParams(0.0, o2)
    start = newton_solve(hx.ModeState(0j, -1j * o2 / cheap_sys.gamma2, 0j),
                         cheap_sys, cheap_det, drive)
    assert start.converged
    ctl = StepControl(ds0=0.02, ds_min=1e-8, ds_max=0.05, max_points=600)
    cur = continue_branch(start, cheap_sys, cheap_det, drive,
                          (0.0, 1.2 * o_th), ctl, start_omega1=0.0,
                          direction=+1)
    assert len(cur) > 30
    sampled = [fp for o1, fp in zip(cur.omega1, cur.points) if o1 > 0.01 * o_th]
    for fp in sampled:
        i1, i2, ib = fp.intensities
        assert i2 > 0 and ib > 0
    # smoothness: no step-to-step intensity jump beyond the step resolution
    ibs = np.array([fp.intensities[2] for _, fp in
                    zip(cur.omega1, cur.points)])
    ratios = (ibs[1:] + 1e-300) / (ibs[:-1] + 1e-300)
    assert ratios.max() < 10 and ratios.min() > 0.1


def test_continuation_requires_converged_start(cheap_sys, cheap_det):
    bad = steady.FixedPoint(hx.ORIGIN, 1.0, "unresolved", False)
    with pytest.raises(ValueError, match="converged"):
        continue_branch(bad, cheap_sys, cheap_det, hx.DriveParams(1.0, 0.0),
                        (0.0, 2.0), StepControl(ds0=0.01, ds_min=1e-6,
                                                ds_max=0.1))


def test_branch_curve_csv(tmp_path, cheap_sys, cheap_det, cheap_thresholds):
    drive = hx.DriveParams(0.1 * cheap_thresholds.omega_th, 0.0)
    start = analytic_low_branch(cheap_sys, cheap_det, drive)
    ctl = StepControl(ds0=0.05, ds_min=1e-6, ds_max=0.1, max_points=40)
    cur = continue_branch(start, cheap_sys, cheap_det, drive,
                          (0.0, 0.5 * cheap_thresholds.omega_th), ctl)
    path = tmp_path / "branch.csv"
    cur.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("Omega1,re_a1")
    assert len(lines) == len(cur) + 1
    cells = lines[1].split(",")
    assert len(cells) == 13 and cells[10] == "low"
