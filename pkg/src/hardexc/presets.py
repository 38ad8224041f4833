"""Bundled run configurations.

"fig2" is the hard-excitation working point (pump detuned six linewidth-
decades below both optical/phonon resonances); "soft" differs only by a
resonant pump (zero detunings), which breaks the hard-excitation inequality
so the generation onset is continuous and there is no bistable window.
"""

from __future__ import annotations

import copy

FIG2 = {
    "system": {
        "gamma1_hz": 19e6,
        "gamma2_hz": 19e6,
        "gamma_b_hz": 121e6,
        "g_hz": 1.6e3,
    },
    "detunings": {
        "d_omega1_hz": -6e9,
        "d_omega_b_hz": -6e9,
        "delta2_hz": 0.0,
    },
    "drive": {
        "pump_amp": {"relative_to_th": 1.1},
        "seed_amp": 0.0,
    },
    "integrator": {
        "rel_tol": 3e-13,
        "abs_tol": 1e-12,
    },
    "sweep": {
        "omega1": {"min": 0.0, "max": {"relative_to_th": 1.2}, "count": 200,
                   "spacing": "linear"},
        "omega2": {"min": 0.0, "max": {"relative_to_th": 0.1}, "count": 9,
                   "spacing": "linear"},
        "omega2_values": [0.0, {"relative_to_th": 0.03},
                          {"relative_to_th": 0.07}],
        "protocol": "coldStart",
        "kick_rel": 1e-8,
        "settle_cap": 1e4,
    },
    "fig5": {"seed_fraction": 0.07, "pump_fraction": 0.7},
}

SOFT = copy.deepcopy(FIG2)
SOFT["detunings"] = {"d_omega1_hz": 0.0, "d_omega_b_hz": 0.0, "delta2_hz": 0.0}
SOFT["sweep"]["settle_cap"] = 2e3

PRESETS = {"fig2": FIG2, "soft": SOFT}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])
