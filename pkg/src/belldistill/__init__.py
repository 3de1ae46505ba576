"""Bell-inequality violation and multipartite distillability analysis for qubit states."""

from .qlinalg import DensityMatrix, QubitSubset
from .bell import MeasurementSettings, BellOperator, mbk_operator, uffink_operator, violation
from .states import ghz, make_rho_r, make_w_mixture, make_padded_ghz

__version__ = "0.1.0"

__all__ = [
    "BellOperator",
    "DensityMatrix",
    "MeasurementSettings",
    "QubitSubset",
    "ghz",
    "make_padded_ghz",
    "make_rho_r",
    "make_w_mixture",
    "mbk_operator",
    "uffink_operator",
    "violation",
]
