"""Simulator and analysis toolkit for a seeded two-color optomechanical system."""

__version__ = "0.1.0"

from .model import (Detunings, DriveParams, ModeState, NumericOverflowError,
                    ORIGIN, SystemParams, energy_and_charges, from_rotating,
                    rhs_lab, rhs_rotating, to_rotating)
from .integrate import (IntegratorConfig, LabRHS, RotatingRHS, StiffnessError,
                        Trajectory, integrate, settle)

__all__ = [
    "__version__",
    "Detunings", "DriveParams", "ModeState", "NumericOverflowError", "ORIGIN",
    "SystemParams", "energy_and_charges", "from_rotating", "rhs_lab",
    "rhs_rotating", "to_rotating",
    "IntegratorConfig", "LabRHS", "RotatingRHS", "StiffnessError", "Trajectory",
    "integrate", "settle",
]
