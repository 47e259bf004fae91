"""The three concurrent applications sharing the sensor streams.

Each app is an independent bus service; they communicate only through
bus topics and requests, so disabling one never changes the others.
"""

from .comfort import ComfortApp, ComfortFeedback, FeedbackLog, estimate_preference
from .energy import (EnergyApp, SavingsReport, ThermostatConfig, ThermostatState,
                     occupancy_setback, thermostat_step)
from .security import Alert, SecurityApp, evaluate_security

__all__ = [
    "Alert", "ComfortApp", "ComfortFeedback", "EnergyApp", "FeedbackLog",
    "SavingsReport", "SecurityApp", "ThermostatConfig", "ThermostatState",
    "estimate_preference", "evaluate_security", "occupancy_setback", "thermostat_step",
]
