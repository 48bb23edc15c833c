"""ADER-WENO finite-volume solver for hyperbolic balance laws.

One-step, arbitrary-order finite-volume schemes on 1D/2D Cartesian grids
with WENO reconstruction and a local space-time predictor, in two variants:
reconstruction/evolution of conserved variables, or of primitive variables
(one EOS inversion per cell per step).
"""

from .systems import make_system, System, RecoveryError
from .basis import gauss_legendre, NodalBasis

__version__ = "0.1.0"

__all__ = [
    "make_system", "System", "RecoveryError",
    "gauss_legendre", "NodalBasis", "__version__",
]
