"""kvtopo: object detection in anisotropic media from boundary measurements.

The toolkit solves a pair of forward problems (one driven by the imposed
flux, one by the measured trace) on a trial domain, measures their energy
misfit, and evaluates the closed-form topological gradient of that misfit.
Negative level sets of the gradient locate the hidden object in a single
iteration. Supporting modules compute polarization matrices by boundary
integral equations and validate the underlying asymptotic expansion
numerically.
"""

__version__ = "0.1.0"

from .errors import (
    AssemblyError,
    ConfigError,
    GeometryError,
    MeshError,
    MeshParseError,
    SolveError,
    ToolkitError,
)

__all__ = [
    "__version__",
    "ToolkitError",
    "ConfigError",
    "MeshError",
    "MeshParseError",
    "AssemblyError",
    "SolveError",
    "GeometryError",
]
