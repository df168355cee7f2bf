"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all kvtopo errors."""


class ConfigError(ToolkitError):
    """Invalid configuration; the message names the offending key."""


class MeshError(ToolkitError):
    """Mesh generation or validation failure."""


class MeshParseError(MeshError):
    """Malformed mesh or measurement file; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class GeometryError(ToolkitError):
    """Invalid geometric input (clearance violation, degenerate shape)."""


class AssemblyError(ToolkitError):
    """FEM assembly failure (bad coefficient, missing Dirichlet data)."""


class SolveError(ToolkitError):
    """Linear solver non-convergence or breakdown."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
