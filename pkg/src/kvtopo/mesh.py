"""Unstructured triangle meshes of disks and rectangles with tagged boundaries.

The outer boundary is split into an accessible part (GAMMA_A) and an
inaccessible part (GAMMA_I); hole boundaries are tagged SIGMA. Meshes are
Delaunay triangulations of deterministic point sets. Interior points carry a
tiny coordinate-hash jitter so the point set is in general position: the
Delaunay triangulation is then unique, and a punctured mesh reuses exactly
the background triangulation of the unpunctured one away from the hole.
That identity makes energy differences between the two meshes meaningful.

Text format (see save_mesh/load_mesh):
    nodes <n_v>         followed by n_v lines  "x y"
    triangles <n_t>     followed by n_t lines  "i j k"   (0-based, CCW)
    boundary <n_b>      followed by n_b lines  "i j TAG"
with TAG one of GAMMA_A, GAMMA_I, SIGMA; '#' starts a comment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .errors import GeometryError, MeshError, MeshParseError

_TWO_PI = 2.0 * np.pi

# Interior-point jitter as a fraction of the target edge length. Large enough
# to break every cocircular tie in float64, small enough to keep the longest
# Delaunay edge under the 1.5*h contract.
_JITTER = 0.02

# Geometric growth of point spacing in the graded rings around a hole.
_RING_GROWTH = 1.4


class BoundaryTag(Enum):
    GAMMA_A = "GAMMA_A"
    GAMMA_I = "GAMMA_I"
    SIGMA = "SIGMA"


@dataclass(frozen=True)
class Perturbation:
    """A small disk-shaped hole: center z, radius eps, polygonized with
    n_segments sides."""

    center: tuple[float, float]
    eps: float
    n_segments: int = 26

    def __post_init__(self):
        if self.eps <= 0:
            raise GeometryError(f"perturbation radius must be positive, got {self.eps}")
        if self.n_segments < 12:
            raise GeometryError(
                f"perturbation needs at least 12 segments, got {self.n_segments}"
            )

    def polygon(self) -> np.ndarray:
        """Vertices of the regular n-gon inscribed in the circle (z, eps)."""
        theta = _TWO_PI * np.arange(self.n_segments) / self.n_segments
        return np.column_stack(
            [
                self.center[0] + self.eps * np.cos(theta),
                self.center[1] + self.eps * np.sin(theta),
            ]
        )


# ---------------------------------------------------------------------------
# Domain specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiskSpec:
    """Disk of given radius; the accessible boundary is the CCW angular arc
    [arc_start, arc_end) in radians (wrapping allowed)."""

    radius: float
    h: float
    gamma_a_arc: tuple[float, float] = (0.0, np.pi)

    def __post_init__(self):
        if not (0 < self.h < self.radius):
            raise GeometryError(
                f"need 0 < h < radius, got h={self.h}, radius={self.radius}"
            )
        span = (self.gamma_a_arc[1] - self.gamma_a_arc[0]) % _TWO_PI
        if span == 0.0:
            raise GeometryError(
                "gamma_a_arc must be a nonempty strict subset of the circle"
            )

    @property
    def perimeter(self) -> float:
        return _TWO_PI * self.radius

    def boundary_points(self) -> np.ndarray:
        n = max(12, int(np.ceil(self.perimeter / self.h)))
        theta = _TWO_PI * np.arange(n) / n
        return self.radius * np.column_stack([np.cos(theta), np.sin(theta)])

    def interior_points(self) -> np.ndarray:
        n_r = int(np.ceil(self.radius / self.h))
        dr = self.radius / n_r
        pts = [np.zeros((1, 2))]
        for k in range(1, n_r):
            r = k * dr
            m = max(6, int(np.ceil(_TWO_PI * r / self.h)))
            phase = (k % 2) * np.pi / m
            theta = phase + _TWO_PI * np.arange(m) / m
            ring = r * np.column_stack([np.cos(theta), np.sin(theta)])
            ring += _jitter_for(ring, self.h)
            pts.append(ring)
        return np.vstack(pts)

    def boundary_param(self, points: np.ndarray) -> np.ndarray:
        """Arc-length coordinate along the outer boundary, from angle 0 CCW."""
        p = np.atleast_2d(points)
        theta = np.mod(np.arctan2(p[:, 1], p[:, 0]), _TWO_PI)
        return self.radius * theta

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        return self.radius - np.hypot(p[:, 0], p[:, 1])

    def classify_outer(self, midpoints: np.ndarray) -> np.ndarray:
        theta = np.mod(np.arctan2(midpoints[:, 1], midpoints[:, 0]), _TWO_PI)
        a0, a1 = self.gamma_a_arc
        span = (a1 - a0) % _TWO_PI
        in_arc = np.mod(theta - a0, _TWO_PI) < span
        return np.where(in_arc, BoundaryTag.GAMMA_A, BoundaryTag.GAMMA_I)

    def describe(self) -> dict:
        return {
            "shape": "disk",
            "radius": self.radius,
            "h": self.h,
            "arc_start": self.gamma_a_arc[0],
            "arc_end": self.gamma_a_arc[1],
        }


_SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class RectSpec:
    """Axis-aligned rectangle [0,width] x [0,height]; gamma_a_sides names the
    accessible sides."""

    width: float
    height: float
    h: float
    gamma_a_sides: frozenset[str] = frozenset({"bottom", "right", "top"})

    def __post_init__(self):
        if not (0 < self.h < min(self.width, self.height)):
            raise GeometryError(
                f"need 0 < h < min(width, height), got h={self.h}"
            )
        bad = set(self.gamma_a_sides) - set(_SIDES)
        if bad:
            raise GeometryError(f"unknown side names {sorted(bad)}")
        if not self.gamma_a_sides or set(self.gamma_a_sides) == set(_SIDES):
            raise GeometryError(
                "gamma_a_sides must be a nonempty strict subset of the four sides"
            )

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.width + self.height)

    def boundary_points(self) -> np.ndarray:
        w, h = self.width, self.height

        def side(p0, p1, length):
            n = int(np.ceil(length / self.h))
            t = np.arange(n) / n
            return np.asarray(p0) + t[:, None] * (np.asarray(p1) - np.asarray(p0))

        return np.vstack(
            [
                side((0, 0), (w, 0), w),
                side((w, 0), (w, h), h),
                side((w, h), (0, h), w),
                side((0, h), (0, 0), h),
            ]
        )

    def interior_points(self) -> np.ndarray:
        nx = int(np.ceil(self.width / self.h))
        ny = int(np.ceil(self.height / self.h))
        xs = np.arange(1, nx) * (self.width / nx)
        ys = np.arange(1, ny) * (self.height / ny)
        gx, gy = np.meshgrid(xs, ys)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        pts += _jitter_for(pts, self.h)
        return pts

    def _side_of(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        tol = 1e-9 * max(self.width, self.height)
        side = np.full(len(p), -1, dtype=int)
        side[np.abs(p[:, 1]) < tol] = 0
        side[(side < 0) & (np.abs(p[:, 0] - self.width) < tol)] = 1
        side[(side < 0) & (np.abs(p[:, 1] - self.height) < tol)] = 2
        side[(side < 0) & (np.abs(p[:, 0]) < tol)] = 3
        if np.any(side < 0):
            raise GeometryError("point not on the rectangle boundary")
        return side

    def boundary_param(self, points: np.ndarray) -> np.ndarray:
        """Perimeter coordinate, CCW from the origin corner."""
        p = np.atleast_2d(points)
        side = self._side_of(p)
        w, h = self.width, self.height
        s = np.empty(len(p))
        s[side == 0] = p[side == 0, 0]
        s[side == 1] = w + p[side == 1, 1]
        s[side == 2] = w + h + (w - p[side == 2, 0])
        s[side == 3] = 2 * w + h + (h - p[side == 3, 1])
        return s

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.minimum.reduce(
            [p[:, 0], self.width - p[:, 0], p[:, 1], self.height - p[:, 1]]
        )

    def classify_outer(self, midpoints: np.ndarray) -> np.ndarray:
        side = self._side_of(midpoints)
        names = np.array(_SIDES)[side]
        return np.where(
            np.isin(names, list(self.gamma_a_sides)),
            BoundaryTag.GAMMA_A,
            BoundaryTag.GAMMA_I,
        )

    def describe(self) -> dict:
        return {
            "shape": "rect",
            "width": self.width,
            "height": self.height,
            "h": self.h,
            "gamma_a_sides": ",".join(sorted(self.gamma_a_sides)),
        }


MeshSpec = DiskSpec | RectSpec


def _hash01(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Deterministic pseudo-random values in [0,1) from two index arrays."""
    t = np.sin(a * 12.9898 + b * 78.233) * 43758.5453123
    return t - np.floor(t)


def _jitter_for(points: np.ndarray, h: float) -> np.ndarray:
    """Coordinate-keyed jitter; identical coordinates always get identical
    offsets, so subsets of a point cloud stay consistent."""
    ix = np.round(points[:, 0] / h * 8192.0)
    iy = np.round(points[:, 1] / h * 8192.0)
    ux = _hash01(ix, iy)
    uy = _hash01(iy + 0.137, ix)
    return (np.column_stack([ux, uy]) - 0.5) * (2 * _JITTER * h)


# ---------------------------------------------------------------------------
# Mesh container
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Mesh:
    """Conforming triangle mesh with tagged boundary edges.

    Attributes
    ----------
    nodes : (n_v, 2) float array
    triangles : (n_t, 3) int array, counter-clockwise
    boundary_edges : (n_b, 2) int array, oriented as in the owning triangle
    boundary_tags : (n_b,) object array of BoundaryTag
    dim : spatial dimension (always 2)
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    dim: int = 2

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int64)
        self.boundary_tags = np.asarray(self.boundary_tags, dtype=object)
        for arr in (self.nodes, self.triangles, self.boundary_edges):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def boundary_node_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    @cached_property
    def interior_node_mask(self) -> np.ndarray:
        return ~self.boundary_node_mask

    @cached_property
    def max_edge_length(self) -> float:
        p = self.nodes[self.triangles]
        lengths = [
            np.hypot(*(p[:, i] - p[:, j]).T) for i, j in ((0, 1), (1, 2), (2, 0))
        ]
        return float(np.max(lengths))

    def boundary_nodes(self, tag: BoundaryTag) -> np.ndarray:
        """Sorted indices of nodes incident to at least one edge with tag."""
        sel = self.boundary_edges[self.boundary_tags == tag]
        return np.unique(sel)

    def has_tag(self, tag: BoundaryTag) -> bool:
        return bool(np.any(self.boundary_tags == tag))

    @cached_property
    def _centroid_tree(self) -> cKDTree:
        return cKDTree(self.centroids)

    def locate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Find containing triangles and barycentric coordinates.

        Returns (tri_index, bary) with tri_index -1 for points outside the
        mesh. Points on shared edges resolve to the nearest candidate.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        k = min(24, self.n_triangles)
        _, cand = self._centroid_tree.query(p, k=k)
        cand = np.atleast_2d(cand)
        tri_idx = np.full(len(p), -1, dtype=np.int64)
        bary = np.zeros((len(p), 3))
        tol = -1e-9
        pending = np.arange(len(p))
        for col in range(cand.shape[1]):
            if len(pending) == 0:
                break
            t = cand[pending, col]
            l1, l2, l3 = self._bary(p[pending], t)
            ok = (l1 >= tol) & (l2 >= tol) & (l3 >= tol)
            hit = pending[ok]
            tri_idx[hit] = t[ok]
            bary[hit, 0] = l1[ok]
            bary[hit, 1] = l2[ok]
            bary[hit, 2] = l3[ok]
            pending = pending[~ok]
        return tri_idx, bary

    def _bary(self, pts, tris):
        v = self.nodes[self.triangles[tris]]
        d = (v[:, 1, 1] - v[:, 2, 1]) * (v[:, 0, 0] - v[:, 2, 0]) + (
            v[:, 2, 0] - v[:, 1, 0]
        ) * (v[:, 0, 1] - v[:, 2, 1])
        l1 = (
            (v[:, 1, 1] - v[:, 2, 1]) * (pts[:, 0] - v[:, 2, 0])
            + (v[:, 2, 0] - v[:, 1, 0]) * (pts[:, 1] - v[:, 2, 1])
        ) / d
        l2 = (
            (v[:, 2, 1] - v[:, 0, 1]) * (pts[:, 0] - v[:, 2, 0])
            + (v[:, 0, 0] - v[:, 2, 0]) * (pts[:, 1] - v[:, 2, 1])
        ) / d
        return l1, l2, 1.0 - l1 - l2


def _edge_key(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    lo = np.minimum(a, b).astype(np.int64)
    hi = np.maximum(a, b).astype(np.int64)
    return lo << 32 | hi


def validate_mesh(mesh: Mesh) -> None:
    """Check the mesh invariants; raise MeshError on the first violation."""
    n_v = mesh.n_nodes
    if not np.all(np.isfinite(mesh.nodes)):
        raise MeshError("non-finite node coordinates")
    if mesh.triangles.min(initial=0) < 0 or mesh.triangles.max(initial=-1) >= n_v:
        raise MeshError("triangle references a node index out of range")

    areas = mesh.areas
    if np.any(areas <= 0):
        i = int(np.argmin(areas))
        raise MeshError(f"triangle {i} has negative area ({areas[i]:.3e})")
    p = mesh.nodes[mesh.triangles]
    max_edge_sq = np.maximum.reduce(
        [((p[:, i] - p[:, j]) ** 2).sum(axis=1) for i, j in ((0, 1), (1, 2), (2, 0))]
    )
    degenerate = areas < 1e-14 * max_edge_sq
    if np.any(degenerate):
        raise MeshError(f"triangle {int(np.argmax(degenerate))} is degenerate")

    # Edge usage: interior edges twice, boundary edges once, and the set of
    # once-used edges must coincide with the declared boundary.
    tri = mesh.triangles
    keys = np.concatenate(
        [_edge_key(tri[:, i], tri[:, j]) for i, j in ((0, 1), (1, 2), (2, 0))]
    )
    uniq, counts = np.unique(keys, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("non-conforming mesh: an edge is shared by >2 triangles")
    once = set(uniq[counts == 1].tolist())
    declared = set(
        _edge_key(mesh.boundary_edges[:, 0], mesh.boundary_edges[:, 1]).tolist()
    )
    if len(declared) != len(mesh.boundary_edges):
        raise MeshError("duplicate boundary edges declared")
    if once != declared:
        raise MeshError(
            "declared boundary does not match the mesh "
            f"({len(declared)} declared, {len(once)} actual boundary edges)"
        )

    # Oriented boundary edges must each appear as a directed triangle edge.
    directed = set()
    for i, j in ((0, 1), (1, 2), (2, 0)):
        directed.update(
            (int(a) << 32 | int(b)) for a, b in zip(tri[:, i], tri[:, j])
        )
    be = mesh.boundary_edges
    for a, b in be:
        if (int(a) << 32 | int(b)) not in directed:
            raise MeshError(f"boundary edge ({a},{b}) is not oriented with its triangle")

    # Signed-area identity: triangle areas sum to the boundary shoelace area.
    tri_area = float(np.sum(areas))
    pa = mesh.nodes[be[:, 0]]
    pb = mesh.nodes[be[:, 1]]
    shoelace = 0.5 * float(np.sum(pa[:, 0] * pb[:, 1] - pb[:, 0] * pa[:, 1]))
    if abs(tri_area - shoelace) > 1e-12 * abs(tri_area):
        raise MeshError(
            f"area mismatch: triangles {tri_area!r} vs boundary loop {shoelace!r}"
        )


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def _convex_polygon_contains(vertices: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    v0 = vertices
    v1 = np.roll(vertices, -1, axis=0)
    edge = v1 - v0

    def contains(points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        rel = p[None, :, :] - v0[:, None, :]
        cross = edge[:, None, 0] * rel[:, :, 1] - edge[:, None, 1] * rel[:, :, 0]
        return np.all(cross >= 0.0, axis=0)

    return contains


def _graded_rings(
    offset_sampler: Callable[[float, float], np.ndarray], s0: float, h: float
) -> tuple[list[tuple[np.ndarray, float]], float]:
    """Point rings around a hole, spacing growing from s0 to the background h.

    Returns (ring, spacing) pairs and the offset distance of the outermost
    ring.
    """
    rings: list[tuple[np.ndarray, float]] = []
    s, d = s0, 0.0
    while s < 0.999 * h:
        s = min(_RING_GROWTH * s, h)
        d += s
        rings.append((offset_sampler(d, s), s))
    d += max(h, s0)
    rings.append((offset_sampler(d, h), h))
    jittered = []
    for k, (ring, spacing) in enumerate(rings):
        local = np.hypot(*np.diff(np.vstack([ring, ring[:1]]), axis=0).T).mean()
        u = _hash01(np.full(len(ring), float(k + 1)), np.arange(len(ring), dtype=float))
        v = _hash01(np.arange(len(ring), dtype=float) + 0.61, np.full(len(ring), float(k + 1)))
        pts = ring + (np.column_stack([u, v]) - 0.5) * (2 * _JITTER * local)
        jittered.append((pts, spacing))
    return jittered, d


def _assemble_mesh(
    spec: MeshSpec,
    hole_pts: np.ndarray | None = None,
    hole_rings: list[tuple[np.ndarray, float]] | None = None,
    hole_clear: float = 0.0,
    hole_contains: Callable[[np.ndarray], np.ndarray] | None = None,
    hole_tree: cKDTree | None = None,
) -> Mesh:
    outer = spec.boundary_points()
    interior = spec.interior_points()
    n_outer = len(outer)

    blocks = [outer]
    n_hole = 0
    if hole_pts is not None:
        blocks.append(hole_pts)
        n_hole = len(hole_pts)
        for ring, spacing in hole_rings or []:
            # Refinement rings may reach past the outer boundary when the
            # hole sits close to it; keep only well-separated inside points.
            ring = ring[spec.boundary_distance(ring) >= 0.45 * spacing]
            if len(ring):
                blocks.append(ring)
        dist, _ = hole_tree.query(interior)
        keep = (dist >= hole_clear + 0.5 * spec.h) & ~hole_contains(interior)
        interior = interior[keep]
    blocks.append(interior)
    points = np.vstack(blocks)

    tri = Delaunay(points)
    simplices = tri.simplices.astype(np.int64)

    if hole_contains is not None:
        cent = points[simplices].mean(axis=1)
        simplices = simplices[~hole_contains(cent)]

    # Enforce CCW orientation.
    p = points[simplices]
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    signed = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    flip = signed < 0
    simplices[flip, 1], simplices[flip, 2] = (
        simplices[flip, 2].copy(),
        simplices[flip, 1].copy(),
    )

    # Drop nodes not referenced by any kept triangle.
    used = np.unique(simplices)
    remap = np.full(len(points), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    if np.any(remap[:n_outer] < 0) or (n_hole and np.any(remap[n_outer : n_outer + n_hole] < 0)):
        raise MeshError("generation failed: a boundary point was not meshed")
    nodes = points[used]
    simplices = remap[simplices]

    is_outer = np.zeros(len(nodes), dtype=bool)
    is_outer[remap[:n_outer]] = True
    hole_order = np.full(len(nodes), -1, dtype=np.int64)
    if n_hole:
        hole_order[remap[n_outer : n_outer + n_hole]] = np.arange(n_hole)

    edges, tags = _extract_boundary(spec, nodes, simplices, is_outer, hole_order, n_hole)
    mesh = Mesh(nodes, simplices, edges, tags)
    validate_mesh(mesh)
    return mesh


def _extract_boundary(spec, nodes, simplices, is_outer, hole_order, n_hole):
    keys = {}
    for i, j in ((0, 1), (1, 2), (2, 0)):
        a, b = simplices[:, i], simplices[:, j]
        for k, (x, y) in enumerate(zip(a.tolist(), b.tolist())):
            key = (x, y) if x < y else (y, x)
            if key in keys:
                keys[key] = None
            else:
                keys[key] = (x, y)
    oriented = [v for v in keys.values() if v is not None]
    if not oriented:
        raise MeshError("mesh has no boundary")
    edges = np.asarray(oriented, dtype=np.int64)

    out_mask = is_outer[edges[:, 0]] & is_outer[edges[:, 1]]
    hole_mask = (hole_order[edges[:, 0]] >= 0) & (hole_order[edges[:, 1]] >= 0)
    if np.any(~out_mask & ~hole_mask):
        raise MeshError("boundary recovery failed: mixed outer/hole edge")
    if n_hole:
        ha, hb = hole_order[edges[hole_mask, 0]], hole_order[edges[hole_mask, 1]]
        gap = np.minimum((ha - hb) % n_hole, (hb - ha) % n_hole)
        if np.any(gap != 1) or hole_mask.sum() != n_hole:
            raise MeshError("hole boundary was not recovered as a simple loop")

    tags = np.empty(len(edges), dtype=object)
    mid = 0.5 * (nodes[edges[:, 0]] + nodes[edges[:, 1]])
    tags[out_mask] = spec.classify_outer(mid[out_mask])
    tags[hole_mask] = BoundaryTag.SIGMA
    return edges, tags


def generate(spec: MeshSpec) -> Mesh:
    """Mesh the plain domain; raises if either outer tag ends up empty."""
    mesh = _assemble_mesh(spec)
    if mesh.max_edge_length > 1.5 * spec.h:
        raise MeshError(
            f"edge length contract violated: {mesh.max_edge_length:.4g} > 1.5*h"
        )
    for tag in (BoundaryTag.GAMMA_A, BoundaryTag.GAMMA_I):
        if not mesh.has_tag(tag):
            raise MeshError(f"generated mesh has no {tag.value} edges; adjust the arc or h")
    return mesh


def generate_disk_mesh(radius: float, h: float, gamma_a_arc: tuple[float, float]) -> Mesh:
    return generate(DiskSpec(radius=radius, h=h, gamma_a_arc=gamma_a_arc))


def generate_rect_mesh(
    width: float, height: float, h: float, gamma_a_sides
) -> Mesh:
    return generate(RectSpec(width, height, h, frozenset(gamma_a_sides)))


def _check_clearance(spec: MeshSpec, center, eps: float) -> None:
    clear = float(spec.boundary_distance(np.asarray([center]))[0])
    if clear < 3.0 * eps:
        raise GeometryError(
            f"hole violates clearance: boundary distance {clear:.4g} < 3*eps = {3*eps:.4g}"
        )


def puncture(spec: MeshSpec, hole: Perturbation) -> Mesh:
    """Mesh the domain minus the regular-polygon hole, tagging it SIGMA.

    Outer boundary points and background interior points are identical to
    generate(spec); graded point rings refine toward the hole so its local
    edge length matches the polygon side.
    """
    _check_clearance(spec, hole.center, hole.eps)
    poly = hole.polygon()
    s0 = _TWO_PI * hole.eps / hole.n_segments
    cx, cy = hole.center

    def sampler(dist: float, spacing: float) -> np.ndarray:
        r = hole.eps + dist
        m = max(8, int(np.ceil(_TWO_PI * r / spacing)))
        phase = np.pi / m
        theta = phase + _TWO_PI * np.arange(m) / m
        return np.column_stack([cx + r * np.cos(theta), cy + r * np.sin(theta)])

    rings, clear = _graded_rings(sampler, s0, spec.h)
    return _assemble_mesh(
        spec,
        hole_pts=poly,
        hole_rings=rings,
        hole_clear=hole.eps + clear,
        hole_contains=_convex_polygon_contains(poly),
        hole_tree=cKDTree([hole.center]),
    )


def mesh_with_hole(spec: MeshSpec, shape) -> Mesh:
    """Mesh the domain minus an arbitrary closed shape (synthetic scenes)."""
    s0 = min(spec.h, max(spec.h / 4.0, _perimeter_of(shape) / 64.0))
    boundary = shape.boundary_points(s0)
    dists = spec.boundary_distance(boundary)
    if np.any(dists <= 0):
        raise GeometryError("object boundary leaves the domain")

    def sampler(dist: float, spacing: float) -> np.ndarray:
        return shape.offset_points(dist, spacing)

    rings, clear = _graded_rings(sampler, s0, spec.h)
    tree = cKDTree(shape.boundary_points(s0 / 2.0))
    return _assemble_mesh(
        spec,
        hole_pts=boundary,
        hole_rings=rings,
        hole_clear=clear,
        hole_contains=shape.contains,
        hole_tree=tree,
    )


def _perimeter_of(shape) -> float:
    pts = shape.boundary_points(1e9)  # minimum sampling
    seg = np.diff(np.vstack([pts, pts[:1]]), axis=0)
    return float(np.hypot(seg[:, 0], seg[:, 1]).sum())


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def save_mesh(mesh: Mesh, path) -> None:
    lines = [f"nodes {mesh.n_nodes}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.nodes)
    lines.append(f"triangles {mesh.n_triangles}")
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles)
    lines.append(f"boundary {len(mesh.boundary_edges)}")
    lines.extend(
        f"{i} {j} {tag.value}"
        for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags)
    )
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


class _LineReader:
    def __init__(self, path):
        self.items: list[tuple[int, list[str]]] = []
        with open(path) as f:
            for no, raw in enumerate(f, start=1):
                text = raw.split("#", 1)[0].strip()
                if text:
                    self.items.append((no, text.split()))
        self.pos = 0

    def next(self, what: str) -> tuple[int, list[str]]:
        if self.pos >= len(self.items):
            last = self.items[-1][0] if self.items else 0
            raise MeshParseError(last + 1, f"unexpected end of file, expected {what}")
        item = self.items[self.pos]
        self.pos += 1
        return item


def _parse_count(reader: _LineReader, keyword: str) -> int:
    no, toks = reader.next(f"'{keyword} <count>'")
    if len(toks) != 2 or toks[0] != keyword:
        raise MeshParseError(no, f"expected '{keyword} <count>', got {' '.join(toks)!r}")
    try:
        count = int(toks[1])
    except ValueError:
        raise MeshParseError(no, f"invalid count {toks[1]!r}") from None
    if count < 0:
        raise MeshParseError(no, f"negative count {count}")
    return count


def load_mesh(path) -> Mesh:
    """Parse the text format and validate the resulting mesh."""
    reader = _LineReader(path)

    n_v = _parse_count(reader, "nodes")
    nodes = np.empty((n_v, 2))
    for i in range(n_v):
        no, toks = reader.next("node coordinates")
        if len(toks) != 2:
            raise MeshParseError(no, f"expected 'x y', got {' '.join(toks)!r}")
        try:
            nodes[i] = [float(toks[0]), float(toks[1])]
        except ValueError:
            raise MeshParseError(no, f"invalid coordinate in {' '.join(toks)!r}") from None

    n_t = _parse_count(reader, "triangles")
    tris = np.empty((n_t, 3), dtype=np.int64)
    for i in range(n_t):
        no, toks = reader.next("triangle indices")
        if len(toks) != 3:
            raise MeshParseError(no, f"expected 'i j k', got {' '.join(toks)!r}")
        try:
            tris[i] = [int(t) for t in toks]
        except ValueError:
            raise MeshParseError(no, f"invalid index in {' '.join(toks)!r}") from None
        if tris[i].min() < 0 or tris[i].max() >= n_v:
            raise MeshParseError(no, f"node index out of range in {' '.join(toks)!r}")

    n_b = _parse_count(reader, "boundary")
    edges = np.empty((n_b, 2), dtype=np.int64)
    tags = np.empty(n_b, dtype=object)
    valid_tags = {t.value: t for t in BoundaryTag}
    for i in range(n_b):
        no, toks = reader.next("boundary edge")
        if len(toks) != 3:
            raise MeshParseError(no, f"expected 'i j TAG', got {' '.join(toks)!r}")
        try:
            edges[i] = [int(toks[0]), int(toks[1])]
        except ValueError:
            raise MeshParseError(no, f"invalid index in {' '.join(toks)!r}") from None
        if edges[i].min() < 0 or edges[i].max() >= n_v:
            raise MeshParseError(no, f"node index out of range in {' '.join(toks)!r}")
        if toks[2] not in valid_tags:
            raise MeshParseError(no, f"unknown boundary tag {toks[2]!r}")
        tags[i] = valid_tags[toks[2]]

    if reader.pos != len(reader.items):
        no, toks = reader.items[reader.pos]
        raise MeshParseError(no, f"trailing content {' '.join(toks)!r}")

    mesh = Mesh(nodes, tris, edges, tags)
    validate_mesh(mesh)
    return mesh
