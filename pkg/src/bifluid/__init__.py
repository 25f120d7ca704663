"""Steady solver for a two-velocity, one-temperature compressible mixture.

Subpackages follow the solver pipeline: pointwise model laws (model), grid
and discrete calculus (grid, operators), elliptic sub-solves (solvers), the
damped fixed-point continuation (fixed_point), monitoring (diagnostics),
manufactured-solution verification (verification), and the CLI (cli).
"""

from ._kernels import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
