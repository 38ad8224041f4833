"""Physical model of the driven three-mode system.

Two optical modes (complex amplitudes a1, a2) couple through a phonon mode (b)
with strength g.  Mode 1 is pumped off-resonantly at frequency omega_pump with
amplitude Omega1; mode 2 is driven resonantly at its own frequency by a seed of
amplitude Omega2.  All rates and frequencies are angular (rad/s); amplitudes
are dimensionless c-numbers.

The lab frame carries the optical carriers explicitly and is kept for
validation; production work happens in the co-rotating frame, where the
drive phases are removed and the system is autonomous.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

#: relative tolerance for the lab-frame resonance condition omega1 - omega2 = omega_b
RESONANCE_RTOL = 1e-9

#: coupling is considered "not small" (rotating-wave approximation suspect) beyond this
COUPLING_WARN_FRACTION = 1e-3


class NumericOverflowError(ValueError):
    """A state contained non-finite (NaN/Inf) amplitudes."""


def _require_finite_complex(name, value):
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise NumericOverflowError(f"{name} is not finite: {value!r}")


@dataclass(frozen=True)
class SystemParams:
    """Mode decay rates, coupling, and (optionally) lab-frame frequencies.

    gamma1, gamma2, gamma_b : field decay rates, rad/s, >= 0
    g                       : optomechanical coupling, rad/s (sign free)
    omega1, omega2, omega_b : absolute mode frequencies, rad/s; required only
                              for lab-frame runs and energy bookkeeping, and
                              must then satisfy omega1 - omega2 = omega_b.
    """

    gamma1: float
    gamma2: float
    gamma_b: float
    g: float
    omega1: float | None = None
    omega2: float | None = None
    omega_b: float | None = None

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "gamma_b", "g"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if self.gamma1 < 0 or self.gamma2 < 0 or self.gamma_b < 0:
            raise ValueError("decay rates must be nonnegative")
        omegas = (self.omega1, self.omega2, self.omega_b)
        if any(w is not None for w in omegas):
            if any(w is None for w in omegas):
                raise ValueError("omega1, omega2, omega_b must be given together")
            if not all(math.isfinite(w) and w > 0 for w in omegas):
                raise ValueError("lab-frame frequencies must be finite and positive")
            scale = max(abs(self.omega1), abs(self.omega2), abs(self.omega_b))
            if abs(self.omega1 - self.omega2 - self.omega_b) > RESONANCE_RTOL * scale:
                raise ValueError(
                    "lab frame requires omega1 - omega2 = omega_b "
                    f"(got {self.omega1!r} - {self.omega2!r} != {self.omega_b!r})"
                )
            if abs(self.g) > COUPLING_WARN_FRACTION * min(self.omega1, self.omega2):
                warnings.warn(
                    "coupling g is not small compared with the optical "
                    "frequencies; the rotating-wave model may be inaccurate",
                    stacklevel=2,
                )

    @classmethod
    def from_hz(cls, gamma1, gamma2, gamma_b, g,
                omega1=None, omega2=None, omega_b=None):
        """Build from values quoted as frequency/2pi in Hz."""
        conv = lambda v: None if v is None else TWO_PI * v
        return cls(TWO_PI * gamma1, TWO_PI * gamma2, TWO_PI * gamma_b,
                   TWO_PI * g, conv(omega1), conv(omega2), conv(omega_b))

    @property
    def has_lab_frame(self) -> bool:
        return self.omega1 is not None

    @property
    def gamma_min(self) -> float:
        return min(self.gamma1, self.gamma2, self.gamma_b)

    def rate_scale(self) -> float:
        """Largest decay rate (a characteristic inverse time for damping)."""
        return max(self.gamma1, self.gamma2, self.gamma_b)


@dataclass(frozen=True)
class DriveParams:
    """Pump and seed drive amplitudes and carriers.

    pump_amp (Omega1) and seed_amp (Omega2) are real nonnegative rates, 1/s;
    any drive phase is gauge-equivalent to a rotation of the mode amplitudes
    and is therefore fixed to zero.  pump_freq is the pump carrier omega, and
    seed_freq is pinned to omega2 of the system (resonant seed).  Carriers are
    only needed in the lab frame and for frame transforms.
    """

    pump_amp: float
    seed_amp: float = 0.0
    pump_freq: float | None = None
    seed_freq: float | None = None

    def __post_init__(self):
        for name in ("pump_amp", "seed_amp"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            if v < 0:
                raise ValueError(f"{name} must be nonnegative (phases are gauge-fixed)")

    @classmethod
    def for_system(cls, sys: SystemParams, pump_amp, seed_amp, pump_freq):
        """Lab-frame drive: seed carrier locked to the second mode frequency."""
        if not sys.has_lab_frame:
            raise ValueError("lab-frame drive needs SystemParams with frequencies")
        return cls(pump_amp, seed_amp, pump_freq, sys.omega2)

    @property
    def has_carriers(self) -> bool:
        return self.pump_freq is not None and self.seed_freq is not None

    def replace_amps(self, pump_amp=None, seed_amp=None) -> "DriveParams":
        return DriveParams(
            self.pump_amp if pump_amp is None else pump_amp,
            self.seed_amp if seed_amp is None else seed_amp,
            self.pump_freq, self.seed_freq,
        )


@dataclass(frozen=True)
class Detunings:
    """Frequency detunings of the rotating frame.

    d_omega1 = omega1 - omega_pump, d_omega2 = omega2 - omega_pump,
    delta2 = 0 for the resonant seed, d_omega_b = omega_b + d_omega2.
    Only d_omega1, delta2 and d_omega_b enter the rotating-frame dynamics;
    d_omega2 is kept for bookkeeping and is None when the detunings were
    specified directly rather than derived from lab frequencies.
    """

    d_omega1: float
    delta2: float
    d_omega_b: float
    d_omega2: float | None = None

    @classmethod
    def from_system(cls, sys: SystemParams, drive: DriveParams) -> "Detunings":
        if not sys.has_lab_frame or drive.pump_freq is None:
            raise ValueError("need lab-frame frequencies and a pump carrier")
        d1 = sys.omega1 - drive.pump_freq
        d2 = sys.omega2 - drive.pump_freq
        return cls(d_omega1=d1, delta2=0.0, d_omega_b=sys.omega_b + d2, d_omega2=d2)

    @classmethod
    def from_values(cls, d_omega1, d_omega_b=None, delta2=0.0) -> "Detunings":
        """Direct rotating-frame specification.

        When the two optical modes straddle the phonon frequency exactly
        (omega1 - omega2 = omega_b), the phonon detuning equals the pump
        detuning, which is the default here.
        """
        if d_omega_b is None:
            d_omega_b = d_omega1
        return cls(d_omega1=float(d_omega1), delta2=float(delta2),
                   d_omega_b=float(d_omega_b), d_omega2=None)

    def rate_scale(self) -> float:
        return max(abs(self.d_omega1), abs(self.delta2), abs(self.d_omega_b))


@dataclass(frozen=True)
class ModeState:
    """Complex amplitudes (a1, a2, b) at one instant.  Always finite."""

    a1: complex
    a2: complex
    b: complex

    def __post_init__(self):
        _require_finite_complex("a1", complex(self.a1))
        _require_finite_complex("a2", complex(self.a2))
        _require_finite_complex("b", complex(self.b))

    @classmethod
    def from_array(cls, arr) -> "ModeState":
        a = np.asarray(arr)
        return cls(complex(a[0]), complex(a[1]), complex(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.b], dtype=np.complex128)

    @property
    def intensities(self) -> tuple[float, float, float]:
        # re^2 + im^2 avoids the sqrt/square round trip of abs()**2
        return (self.a1.real ** 2 + self.a1.imag ** 2,
                self.a2.real ** 2 + self.a2.imag ** 2,
                self.b.real ** 2 + self.b.imag ** 2)

    def norm(self) -> float:
        return math.sqrt(abs(self.a1) ** 2 + abs(self.a2) ** 2 + abs(self.b) ** 2)


ORIGIN = ModeState(0j, 0j, 0j)


def rhs_lab(state: ModeState, t: float, sys: SystemParams,
            drive: DriveParams) -> ModeState:
    """Lab-frame time derivative (da1/dt, da2/dt, db/dt).

    The pump enters as -i*Omega1*exp(-i*omega_pump*t) on mode 1 and the seed
    as -i*Omega2*exp(-i*omega2*t) on mode 2.
    """
    if not sys.has_lab_frame:
        raise ValueError("rhs_lab requires lab-frame frequencies")
    if not drive.has_carriers:
        raise ValueError("rhs_lab requires drive carriers")
    a1, a2, b = state.a1, state.a2, state.b
    da1 = ((-sys.gamma1 - 1j * sys.omega1) * a1 - 1j * sys.g * a2 * b
           - 1j * drive.pump_amp * cmath.exp(-1j * drive.pump_freq * t))
    da2 = ((-sys.gamma2 - 1j * sys.omega2) * a2 - 1j * sys.g * a1 * b.conjugate()
           - 1j * drive.seed_amp * cmath.exp(-1j * drive.seed_freq * t))
    db = ((-sys.gamma_b - 1j * sys.omega_b) * b
          - 1j * sys.g * a1 * a2.conjugate())
    return ModeState(da1, da2, db)


def rhs_rotating(state: ModeState, sys: SystemParams, det: Detunings,
                 drive: DriveParams) -> ModeState:
    """Rotating-frame (autonomous) time derivative."""
    a1, a2, b = state.a1, state.a2, state.b
    da1 = ((-sys.gamma1 - 1j * det.d_omega1) * a1 - 1j * sys.g * a2 * b
           - 1j * drive.pump_amp)
    da2 = ((-sys.gamma2 - 1j * det.delta2) * a2 - 1j * sys.g * a1 * b.conjugate()
           - 1j * drive.seed_amp)
    db = ((-sys.gamma_b - 1j * det.d_omega_b) * b
          - 1j * sys.g * a1 * a2.conjugate())
    return ModeState(da1, da2, db)


def to_rotating(state: ModeState, t: float, drive: DriveParams) -> ModeState:
    """Map a lab-frame state at time t to the rotating frame.

    a1 -> a1*exp(+i*omega_pump*t), a2 -> a2*exp(+i*omega2*t),
    b -> b*exp(+i*(omega_pump - omega2)*t).  Pure phase rotation: intensities
    are preserved exactly and the map inverts to machine precision.
    """
    if not drive.has_carriers:
        raise ValueError("frame transform requires drive carriers")
    w, w2 = drive.pump_freq, drive.seed_freq
    return ModeState(
        state.a1 * cmath.exp(1j * w * t),
        state.a2 * cmath.exp(1j * w2 * t),
        state.b * cmath.exp(1j * (w - w2) * t),
    )


def from_rotating(state: ModeState, t: float, drive: DriveParams) -> ModeState:
    """Inverse of :func:`to_rotating`."""
    if not drive.has_carriers:
        raise ValueError("frame transform requires drive carriers")
    w, w2 = drive.pump_freq, drive.seed_freq
    return ModeState(
        state.a1 * cmath.exp(-1j * w * t),
        state.a2 * cmath.exp(-1j * w2 * t),
        state.b * cmath.exp(-1j * (w - w2) * t),
    )


def gauge_rotate(state: ModeState, phi: float) -> ModeState:
    """Joint phase rotation (a2, b) -> (a2 e^{i phi}, b e^{-i phi}).

    With a zero seed this maps solutions of the rotating-frame flow to
    solutions; the generating branch is a circle of states under it.
    """
    ph = cmath.exp(1j * phi)
    return ModeState(state.a1, state.a2 * ph, state.b / ph)


def energy_and_charges(state: ModeState, sys: SystemParams):
    """Conserved functionals of the undriven, undamped lab-frame flow.

    Returns (H, N12, N2b) with
        H   = omega1*|a1|^2 + omega2*|a2|^2 + omega_b*|b|^2 + 2 g Re(a1* a2 b)
        N12 = |a1|^2 + |a2|^2
        N2b = |a2|^2 - |b|^2
    Each interaction event converts one quantum of mode 2 plus one phonon into
    one quantum of mode 1, so all three are constants of the motion.
    """
    if not sys.has_lab_frame:
        raise ValueError("energy bookkeeping requires lab-frame frequencies")
    i1, i2, ib = state.intensities
    h = (sys.omega1 * i1 + sys.omega2 * i2 + sys.omega_b * ib
         + 2.0 * sys.g * (state.a1.conjugate() * state.a2 * state.b).real)
    return h, i1 + i2, i2 - ib
