"""Polarization matrices by boundary integral collocation.

The exterior correctors of a small insulating inclusion are single-layer
potentials whose densities solve a second-kind integral equation with the
adjoint double-layer kernel. For a basis direction e the density eta
satisfies

    -eta(y)/2 + int_panel grad E(y - x) . n(y) eta(x) ds(x) = -e . n(y)

with E(y) = -log|y| / (2*pi). Discretization: piecewise-constant densities
on straight panels, collocation at midpoints, 4-point Gauss off-panel
integrals, exact zero self-term (the kernel vanishes on a flat panel). The
polarization matrix entries are M[i][j] = int eta_i y_j ds; for the unit
disk M = 2*pi*I.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, SolveError

_TWO_PI = 2.0 * np.pi

# 4-point Gauss-Legendre rule mapped to [0, 1].
_GAUSS_S = 0.5 + 0.5 * np.array(
    [-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526]
)
_GAUSS_W = 0.5 * np.array(
    [0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538]
)


@dataclass(eq=False)
class PanelCurve:
    """Closed panelized curve: straight segments with outward unit normals."""

    starts: np.ndarray
    ends: np.ndarray

    def __post_init__(self):
        self.starts = np.asarray(self.starts, dtype=float)
        self.ends = np.asarray(self.ends, dtype=float)
        if self.starts.shape != self.ends.shape or self.starts.ndim != 2:
            raise GeometryError("panel endpoint arrays must have matching (n, 2) shapes")
        if len(self.starts) < 12:
            raise GeometryError("need at least 12 panels")
        if not np.allclose(np.roll(self.starts, -1, axis=0), self.ends, atol=1e-12):
            raise GeometryError("panels do not form a closed curve")
        seg = self.ends - self.starts
        self.lengths = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(self.lengths <= 0):
            raise GeometryError("zero-length panel")
        tangent = seg / self.lengths[:, None]
        # Rotate the tangent by -90 degrees: outward for a CCW curve.
        self.normals = np.column_stack([tangent[:, 1], -tangent[:, 0]])
        self.midpoints = 0.5 * (self.starts + self.ends)
        area2 = np.sum(
            self.starts[:, 0] * self.ends[:, 1] - self.ends[:, 0] * self.starts[:, 1]
        )
        if area2 <= 0:
            raise GeometryError("curve must be positively oriented (CCW)")

    @property
    def n_panels(self) -> int:
        return len(self.starts)

    @classmethod
    def from_points(cls, points: np.ndarray) -> "PanelCurve":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.roll(pts, -1, axis=0))

    @classmethod
    def circle(cls, radius: float = 1.0, n_panels: int = 256, center=(0.0, 0.0)) -> "PanelCurve":
        theta = _TWO_PI * np.arange(n_panels) / n_panels
        pts = np.column_stack(
            [center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)]
        )
        return cls.from_points(pts)

    @classmethod
    def ellipse(
        cls, a: float, b: float, n_panels: int = 256, angle: float = 0.0, center=(0.0, 0.0)
    ) -> "PanelCurve":
        theta = _TWO_PI * np.arange(n_panels) / n_panels
        base = np.column_stack([a * np.cos(theta), b * np.sin(theta)])
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return cls.from_points(base @ rot.T + np.asarray(center))


@dataclass(eq=False)
class Density:
    """Piecewise-constant layer density on the panels of a curve."""

    curve: PanelCurve
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.curve.n_panels,):
            raise GeometryError("density length does not match panel count")
        if not np.all(np.isfinite(self.values)):
            raise GeometryError("density contains non-finite values")


@dataclass(frozen=True)
class PolarizationMatrix:
    """2x2 polarization matrix with its measured symmetry defect."""

    matrix: np.ndarray
    symmetry_defect: float


def fundamental_solution(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Laplace fundamental solution E(y) = -log|y|/(2 pi) and its gradient.

    Accepts a single point or an (n, 2) array; raises at y = 0.
    """
    p = np.atleast_2d(np.asarray(y, dtype=float))
    r2 = np.sum(p * p, axis=-1)
    if np.any(r2 == 0.0):
        raise GeometryError("fundamental solution is singular at the origin")
    value = -np.log(r2) / (2.0 * _TWO_PI)  # -log(r)/(2 pi) via r2
    grad = -p / (_TWO_PI * r2[:, None])
    if np.ndim(y) == 1:
        return float(value[0]), grad[0]
    return value, grad


def _collocation_matrix(curve: PanelCurve) -> np.ndarray:
    """Dense adjoint-double-layer collocation matrix, row-chunked."""
    n = curve.n_panels
    a = np.empty((n, n))
    chunk = max(1, int(2**22 / max(n, 1)))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        mids = curve.midpoints[lo:hi]  # (m, 2)
        norms = curve.normals[lo:hi]
        block = np.zeros((hi - lo, n))
        for s, w in zip(_GAUSS_S, _GAUSS_W):
            xg = curve.starts + s * (curve.ends - curve.starts)  # (n, 2)
            diff = mids[:, None, :] - xg[None, :, :]  # (m, n, 2)
            r2 = np.sum(diff * diff, axis=-1)
            kern = -np.einsum("mnk,mk->mn", diff, norms) / (_TWO_PI * r2)
            block += w * kern * curve.lengths[None, :]
        idx = np.arange(lo, hi)
        block[np.arange(hi - lo), idx] = 0.0  # flat-panel self term is exactly 0
        a[lo:hi] = block
    a[np.diag_indices(n)] -= 0.5
    return a


def solve_density(curve: PanelCurve, direction: np.ndarray) -> Density:
    """Solve the collocation system for the basis direction e."""
    e = np.asarray(direction, dtype=float)
    if e.shape != (2,):
        raise GeometryError("direction must be a 2-vector")
    a = _collocation_matrix(curve)
    rhs = -(curve.normals @ e)
    try:
        eta = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolveError(f"singular collocation matrix: {exc}") from exc
    if not np.all(np.isfinite(eta)):
        raise SolveError("collocation solve produced non-finite density")
    return Density(curve, eta)


def polarization_matrix(curve: PanelCurve) -> PolarizationMatrix:
    """Polarization matrix M[i][j] = sum eta_i * midpoint_j * length."""
    a = _collocation_matrix(curve)
    rhs = -curve.normals  # column i is the right-hand side for basis e_i
    try:
        etas = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolveError(f"singular collocation matrix: {exc}") from exc
    m = np.empty((2, 2))
    weighted = curve.midpoints * curve.lengths[:, None]  # (n, 2)
    for i in range(2):
        m[i] = etas[:, i] @ weighted
    scale = max(1.0, float(np.abs(m).max()))
    defect = abs(m[0, 1] - m[1, 0]) / scale
    return PolarizationMatrix(matrix=m, symmetry_defect=defect)
