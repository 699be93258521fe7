"""Cavity-QED quantum-dot spin qubits: models, gates, scheduling, readout."""

from .device_model import HBAR, K_B

__version__ = "0.1.0"

__all__ = ["HBAR", "K_B", "__version__"]
