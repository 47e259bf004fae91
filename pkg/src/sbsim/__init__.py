"""Desk-scale smart-building platform with simulated devices.

Simulated sensor links (BLE-like, Z-Wave-like, ZigBee-like mesh) feed a
service bus, a CSV-backed time-series store, an occupancy/absence engine
and three concurrent apps (energy, security, comfort), all steerable
through an NDJSON gateway and CLI.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
