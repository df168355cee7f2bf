"""Closed 2D shapes used as hidden objects and mesh holes.

Each shape knows its area, a containment test, and how to sample its
boundary and outward offset curves at a requested spacing. Offset curves
feed the graded point rings that mesh generation places around a hole.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError

_TWO_PI = 2.0 * np.pi


def _resample_closed(points: np.ndarray, spacing: float) -> np.ndarray:
    """Resample a dense closed polyline at roughly uniform arc spacing."""
    seg = np.diff(np.vstack([points, points[:1]]), axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    total = float(seglen.sum())
    n = max(8, int(np.ceil(total / spacing)))
    targets = np.linspace(0.0, total, n, endpoint=False)
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    idx = np.searchsorted(cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(points) - 1)
    frac = (targets - cum[idx]) / np.maximum(seglen[idx], 1e-300)
    nxt = (idx + 1) % len(points)
    return points[idx] + frac[:, None] * (points[nxt] - points[idx])


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError(f"circle radius must be positive, got {self.radius}")

    def area(self) -> float:
        return float(np.pi * self.radius**2)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        d = np.hypot(p[:, 0] - self.center[0], p[:, 1] - self.center[1])
        return d <= self.radius

    def boundary_points(self, spacing: float) -> np.ndarray:
        return self.offset_points(0.0, spacing)

    def offset_points(self, dist: float, spacing: float) -> np.ndarray:
        r = self.radius + dist
        n = max(8, int(np.ceil(_TWO_PI * r / spacing)))
        theta = _TWO_PI * np.arange(n) / n
        return np.column_stack(
            [self.center[0] + r * np.cos(theta), self.center[1] + r * np.sin(theta)]
        )

    def describe(self) -> dict:
        return {"kind": "circle", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    a: float
    b: float
    angle: float = 0.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise GeometryError(f"ellipse axes must be positive, got {self.a}, {self.b}")

    def _rot(self) -> np.ndarray:
        c, s = np.cos(self.angle), np.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def area(self) -> float:
        return float(np.pi * self.a * self.b)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points) - np.asarray(self.center)
        q = p @ self._rot()  # rotate into axis frame
        return (q[:, 0] / self.a) ** 2 + (q[:, 1] / self.b) ** 2 <= 1.0

    def _dense_offset(self, dist: float, n_dense: int = 2048) -> np.ndarray:
        theta = _TWO_PI * np.arange(n_dense) / n_dense
        base = np.column_stack([self.a * np.cos(theta), self.b * np.sin(theta)])
        normal = np.column_stack([self.b * np.cos(theta), self.a * np.sin(theta)])
        normal /= np.hypot(normal[:, 0], normal[:, 1])[:, None]
        pts = (base + dist * normal) @ self._rot().T + np.asarray(self.center)
        return pts

    def boundary_points(self, spacing: float) -> np.ndarray:
        return _resample_closed(self._dense_offset(0.0), spacing)

    def offset_points(self, dist: float, spacing: float) -> np.ndarray:
        return _resample_closed(self._dense_offset(dist), spacing)

    def describe(self) -> dict:
        return {
            "kind": "ellipse",
            "center": list(self.center),
            "a": self.a,
            "b": self.b,
            "angle": self.angle,
        }


@dataclass(frozen=True)
class Polygon:
    """Simple closed polygon given by CCW vertices (outward offsets via shapely)."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        if self._shapely().area <= 0:
            raise GeometryError("polygon is degenerate or has zero area")

    def _shapely(self):
        import shapely.geometry as sg

        return sg.Polygon(self.points)

    def area(self) -> float:
        return float(self._shapely().area)

    def contains(self, points: np.ndarray) -> np.ndarray:
        import shapely

        p = np.atleast_2d(points)
        poly = self._shapely()
        return shapely.contains_xy(poly, p[:, 0], p[:, 1]) | shapely.intersects_xy(
            poly.exterior, p[:, 0], p[:, 1]
        )

    def boundary_points(self, spacing: float) -> np.ndarray:
        coords = np.asarray(self._shapely().exterior.coords)[:-1]
        dense = _resample_closed(coords, spacing / 8.0)
        return _resample_closed(dense, spacing)

    def offset_points(self, dist: float, spacing: float) -> np.ndarray:
        if dist == 0.0:
            return self.boundary_points(spacing)
        buffered = self._shapely().buffer(dist, quad_segs=32)
        coords = np.asarray(buffered.exterior.coords)[:-1]
        return _resample_closed(coords, spacing)

    def describe(self) -> dict:
        return {"kind": "polygon", "points": [list(p) for p in self.points]}


Shape = Circle | Ellipse | Polygon


def shape_from_description(desc: dict) -> Shape:
    """Rebuild a shape from its describe() record."""
    kind = desc.get("kind")
    if kind == "circle":
        return Circle(tuple(desc["center"]), desc["radius"])
    if kind == "ellipse":
        return Ellipse(tuple(desc["center"]), desc["a"], desc["b"], desc.get("angle", 0.0))
    if kind == "polygon":
        return Polygon(tuple(tuple(p) for p in desc["points"]))
    raise GeometryError(f"unknown shape kind {kind!r}")
