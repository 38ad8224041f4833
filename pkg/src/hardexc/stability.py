"""Linearization, eigenvalue analysis, and closed-form excitation thresholds.

The real phase space is ordered (Re a1, Im a1, Re a2, Im a2, Re b, Im b); the
Jacobian is assembled analytically from the Wirtinger derivatives of the
rotating-frame flow, including the conjugate couplings contributed by the
a1*conj(b) and a1*conj(a2) products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import eig as _eig
from .model import Detunings, ModeState, SystemParams

#: |Re lambda| below this multiple of the fastest rate counts as marginal
MARGINAL_BAND = 1e-12


def _wirtinger_block(j, r, c, w, v):
    """Write the 2x2 real block for d f_r / d z_c = w, d f_r / d conj(z_c) = v."""
    j[2 * r, 2 * c] = w.real + v.real
    j[2 * r, 2 * c + 1] = -w.imag + v.imag
    j[2 * r + 1, 2 * c] = w.imag + v.imag
    j[2 * r + 1, 2 * c + 1] = w.real - v.real


def jacobian(state: ModeState, sys: SystemParams, det: Detunings) -> np.ndarray:
    """Exact 6x6 Jacobian of the rotating-frame flow at the given state.

    Drive terms are additive constants and do not appear.
    """
    a1, a2, b = state.a1, state.a2, state.b
    g = sys.g
    j = np.zeros((6, 6))
    _wirtinger_block(j, 0, 0, -sys.gamma1 - 1j * det.d_omega1, 0j)
    _wirtinger_block(j, 0, 1, -1j * g * b, 0j)
    _wirtinger_block(j, 0, 2, -1j * g * a2, 0j)
    _wirtinger_block(j, 1, 0, -1j * g * b.conjugate(), 0j)
    _wirtinger_block(j, 1, 1, -sys.gamma2 - 1j * det.delta2, 0j)
    _wirtinger_block(j, 1, 2, 0j, -1j * g * a1)
    _wirtinger_block(j, 2, 0, -1j * g * a2.conjugate(), 0j)
    _wirtinger_block(j, 2, 1, 0j, -1j * g * a1)
    _wirtinger_block(j, 2, 2, -sys.gamma_b - 1j * det.d_omega_b, 0j)
    return j


def jacobian_corotating(state: ModeState, sys: SystemParams, det: Detunings,
                        nu: float) -> np.ndarray:
    """Jacobian in the frame co-rotating with a phase-unpinned generating state.

    A state whose (a2, b) pair rotates at (-nu, +nu) is an equilibrium of the
    flow with detunings (delta2 - nu, d_omega_b + nu); its stability is read
    off there.  nu = 0 reduces to :func:`jacobian`.
    """
    shifted = Detunings(d_omega1=det.d_omega1, delta2=det.delta2 - nu,
                        d_omega_b=det.d_omega_b + nu, d_omega2=det.d_omega2)
    return jacobian(state, sys, shifted)


@dataclass(frozen=True)
class StabilityReport:
    """Six eigenvalues of the linearization and their classification."""

    eigenvalues: tuple
    spectral_abscissa: float
    stable: bool
    marginal: bool
    least_stable_index: int
    classification: str

    def to_csv_row(self, omega1: float, omega2: float) -> str:
        cells = ["%.17g" % omega1, "%.17g" % omega2]
        for lam in self.eigenvalues:
            cells.append("%.17g" % lam.real)
            cells.append("%.17g" % lam.imag)
        cells.append("%.17g" % self.spectral_abscissa)
        return ",".join(cells)

    @staticmethod
    def csv_header() -> str:
        cols = ["Omega1", "Omega2"]
        for k in range(1, 7):
            cols += [f"re_lambda{k}", f"im_lambda{k}"]
        cols.append("abscissa")
        return ",".join(cols)


def _classify(vals, rate_scale: float) -> StabilityReport:
    re = np.array([v.real for v in vals])
    idx = int(np.argmax(re))
    absc = float(re[idx])
    band = MARGINAL_BAND * max(rate_scale, 1e-300)
    marginal = abs(absc) <= band
    stable = absc < band
    cls = "marginal" if marginal else ("stable" if stable else "unstable")
    return StabilityReport(eigenvalues=tuple(vals), spectral_abscissa=absc,
                           stable=stable, marginal=marginal,
                           least_stable_index=idx, classification=cls)


def analyze_state(state: ModeState, sys: SystemParams, det: Detunings,
                  nu: float = 0.0) -> StabilityReport:
    """Stability report for an arbitrary state (expected: a fixed point)."""
    j = jacobian_corotating(state, sys, det, nu) if nu != 0.0 else \
        jacobian(state, sys, det)
    vals, _vecs = _eig.eig(j)      # raises EigenSolverError on failure
    rate = max(sys.rate_scale(), det.rate_scale(), abs(sys.g))
    return _classify(list(vals), rate)


def analyze(fp, sys: SystemParams, det: Detunings) -> StabilityReport:
    """Stability of a converged fixed point (honours its co-rotation frequency)."""
    if not fp.converged:
        raise ValueError("stability analysis needs a converged fixed point")
    return analyze_state(fp.state, sys, det, nu=getattr(fp, "nu", 0.0))


@dataclass(frozen=True)
class ThresholdSet:
    """Closed-form excitation/bistability thresholds (both in 1/s)."""

    omega_ex: float
    omega_th: float
    hard_mode: bool


def thresholds(sys: SystemParams, det: Detunings) -> ThresholdSet:
    """Hard-excitation threshold pair for the unseeded (Omega2 = 0) system.

    hard_mode requires d_omega1 * (d_omega2 + omega_b) > gamma1 *
    (gamma2 + gamma_b); the bistable window is then [omega_ex, omega_th] with

        omega_ex = sqrt(gamma_b*gamma2)/|g| * |d_omega1 + gamma1*dwb/Gamma|
        omega_th = sqrt(gamma_b*gamma2)/|g|
                   * sqrt((gamma1^2 + d_omega1^2) * (1 + (dwb/Gamma)^2))

    where dwb = d_omega_b and Gamma = gamma2 + gamma_b.  omega_th is exactly
    the pump amplitude at which the non-generating branch loses linear
    stability, and in hard mode omega_ex <= omega_th always (Cauchy-Schwarz).
    """
    if sys.gamma1 <= 0 or sys.gamma2 <= 0 or sys.gamma_b <= 0:
        raise ValueError("thresholds need strictly positive decay rates")
    if sys.g == 0:
        raise ValueError("thresholds need a nonzero coupling")
    gam = sys.gamma2 + sys.gamma_b
    dwb = det.d_omega_b
    root = np.sqrt(sys.gamma_b * sys.gamma2) / abs(sys.g)
    omega_ex = root * abs(det.d_omega1 + sys.gamma1 * dwb / gam)
    omega_th = root * np.sqrt((sys.gamma1 ** 2 + det.d_omega1 ** 2)
                              * (1.0 + (dwb / gam) ** 2))
    hard = det.d_omega1 * dwb > sys.gamma1 * gam
    return ThresholdSet(omega_ex=float(omega_ex), omega_th=float(omega_th),
                        hard_mode=hard)


def bistable_region(sys: SystemParams, det: Detunings):
    """[omega_ex, omega_th] when the hard-excitation inequality holds, else empty."""
    ts = thresholds(sys, det)
    if not ts.hard_mode:
        return None
    return (ts.omega_ex, ts.omega_th)
