"""Uplink spectral-efficiency simulator for cell-free massive MIMO with multi-antenna UEs."""

from .errors import CellFreeError, InvalidConfigError, InvalidStatsError, NumericalError

__version__ = "0.1.0"

__all__ = ["CellFreeError", "InvalidConfigError", "InvalidStatsError", "NumericalError",
           "__version__"]
