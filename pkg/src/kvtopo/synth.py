"""Synthetic overdetermined boundary data from a ground-truth scene.

A hidden object is meshed into the domain at a resolution strictly finer
than the inversion mesh (at most half its edge length, nodes not shared),
the flux-driven problem is solved with an insulating object boundary, and
the trace on the accessible boundary is sampled at the fine mesh nodes.
Optional additive noise is uniform in [-delta, delta] with
delta = noise_level * max|trace|, drawn from numpy's PCG64 generator so runs
are reproducible from the seed. Downstream solvers receive the trace through
piecewise-linear interpolation in the boundary arc-length coordinate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import GeometryError, MeshParseError
from .fem import FieldFn, ProblemData, ScalarField, assemble, solve
from .kv import neumann_bc
from .mesh import BoundaryTag, Mesh, MeshSpec, generate, mesh_with_hole
from .shapes import Shape

_RNG_ALGORITHM = "numpy.PCG64"


@dataclass(frozen=True)
class TrueScene:
    """Ground truth: domain spec (at the inversion resolution), problem data
    without the measured trace, the hidden object (None for a plain
    background), and the synthesis resolution h_true."""

    domain: MeshSpec
    data: ProblemData
    true_object: Shape | None
    h_true: float

    def __post_init__(self):
        if not (0 < self.h_true <= 0.5 * self.domain.h):
            raise GeometryError(
                f"h_true must satisfy 0 < h_true <= h/2 = {0.5 * self.domain.h}, "
                f"got {self.h_true}"
            )

    def synthesis_spec(self) -> MeshSpec:
        return replace(self.domain, h=self.h_true)

    def true_mesh(self) -> Mesh:
        spec = self.synthesis_spec()
        if self.true_object is None:
            return generate(spec)
        boundary = self.true_object.boundary_points(self.h_true)
        clearance = spec.boundary_distance(boundary)
        if np.min(clearance) < 2.0 * self.h_true:
            raise GeometryError(f"object clearance {np.min(clearance):.4g} < 2*h_true")
        return mesh_with_hole(spec, self.true_object)

    def describe(self) -> dict:
        return {
            "domain": self.domain.describe(),
            "object": None if self.true_object is None else self.true_object.describe(),
            "h_true": self.h_true,
        }


@dataclass(eq=False)
class Measurement:
    """Trace samples on the accessible boundary, ordered by arc length."""

    arc: np.ndarray
    points: np.ndarray
    values: np.ndarray
    perimeter: float
    metadata: dict

    def __post_init__(self):
        self.arc = np.asarray(self.arc, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        order = np.argsort(self.arc, kind="stable")
        self.arc = self.arc[order]
        self.points = self.points[order]
        self.values = self.values[order]


def generate_measurement(
    scene: TrueScene, noise_level: float = 0.0, seed: int = 0
) -> Measurement:
    """Solve the flux-driven problem on the true mesh and sample its trace.

    Deterministic in (scene, noise_level, seed); noise_level 0 reproduces the
    noiseless trace bit-exactly (the generator is never drawn).
    """
    if noise_level < 0:
        raise GeometryError(f"noise level must be nonnegative, got {noise_level}")
    mesh = scene.true_mesh()
    field = solve(assemble(mesh, scene.data, neumann_bc(scene.data)))
    nodes = mesh.boundary_nodes(BoundaryTag.GAMMA_A)
    points = mesh.nodes[nodes]
    values = field.values[nodes].copy()
    arc = scene.domain.boundary_param(points)
    order = np.argsort(arc, kind="stable")
    arc, points, values = arc[order], points[order], values[order]
    if noise_level > 0.0:
        delta = noise_level * float(np.abs(values).max())
        rng = np.random.default_rng(seed)
        values = values + rng.uniform(-delta, delta, size=len(values))
    metadata = {
        "scene": scene.describe(),
        "seed": int(seed),
        "noise_level": float(noise_level),
        "h_true": scene.h_true,
        "rng": _RNG_ALGORITHM,
        "n_samples": int(len(values)),
    }
    return Measurement(arc, points, values, scene.domain.perimeter, metadata)


def trace_function(measurement: Measurement, spec: MeshSpec) -> FieldFn:
    """Measured trace as a callable of boundary point coordinates.

    Piecewise-linear in arc length between samples, periodic over the
    perimeter. Sample gaps much wider than the sampling step mark
    inaccessible stretches; a query falling into a gap (inversion-mesh nodes
    can overhang the accessible part by one edge) clamps to the nearest
    sample instead of bridging the gap.
    """
    s = measurement.arc
    v = measurement.values
    per = measurement.perimeter
    if len(s) < 2:
        raise GeometryError("measurement needs at least 2 samples")
    steps = np.diff(s)
    gap_threshold = 5.0 * float(np.median(steps))

    def fn(x, y):
        pts = np.column_stack([np.atleast_1d(x), np.atleast_1d(y)])
        q = np.mod(spec.boundary_param(pts), per)
        idx = np.searchsorted(s, q)
        left = (idx - 1) % len(s)
        right = idx % len(s)
        dl = np.mod(q - s[left], per)
        dr = np.mod(s[right] - q, per)
        width = dl + dr
        with np.errstate(invalid="ignore", divide="ignore"):
            lin = np.where(width > 0, (v[left] * dr + v[right] * dl) / width, v[left])
        nearest = np.where(dl <= dr, v[left], v[right])
        return np.where(width <= gap_threshold, lin, nearest)

    return fn


def consistent_trace(mesh: Mesh, field: ScalarField) -> FieldFn:
    """Trace of a solved field on the accessible boundary of its own mesh.

    Nearest-node lookup, exact when evaluated at the mesh's own boundary
    nodes; used for consistency (null) scenarios.
    """
    nodes = mesh.boundary_nodes(BoundaryTag.GAMMA_A)
    tree = cKDTree(mesh.nodes[nodes])
    vals = field.values[nodes]

    def fn(x, y):
        pts = np.column_stack([np.atleast_1d(x), np.atleast_1d(y)])
        _, idx = tree.query(pts)
        return vals[idx]

    return fn


def with_measurement(data: ProblemData, measurement: Measurement, spec: MeshSpec) -> ProblemData:
    """Problem data with psi_m bound to the measured trace."""
    return replace(data, psi_m=trace_function(measurement, spec))


# ---------------------------------------------------------------------------
# Persistence: CSV samples plus a JSON metadata sidecar
# ---------------------------------------------------------------------------


def save_measurement(measurement: Measurement, path, meta_header: dict | None = None) -> None:
    lines = []
    for key, val in (meta_header or {}).items():
        lines.append(f"# {key}={val}")
    lines.append("arc_length,x,y,psi_m")
    for a, (x, y), v in zip(measurement.arc, measurement.points, measurement.values):
        lines.append(f"{a:.17g},{x:.17g},{y:.17g},{v:.17g}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    meta = dict(measurement.metadata)
    meta["perimeter"] = measurement.perimeter
    with open(_sidecar_path(path), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def _sidecar_path(path) -> str:
    return f"{path}.meta.json"


def load_measurement(path) -> Measurement:
    arcs, xs, ys, vals = [], [], [], []
    with open(path) as f:
        for no, raw in enumerate(f, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text or text.startswith("arc_length"):
                continue
            parts = text.split(",")
            if len(parts) != 4:
                raise MeshParseError(no, f"expected 4 comma-separated fields, got {text!r}")
            try:
                a, x, y, v = (float(p) for p in parts)
            except ValueError:
                raise MeshParseError(no, f"invalid number in {text!r}") from None
            arcs.append(a)
            xs.append(x)
            ys.append(y)
            vals.append(v)
    if len(arcs) < 2:
        raise MeshParseError(1, "measurement file has fewer than 2 samples")
    try:
        with open(_sidecar_path(path)) as f:
            meta = json.load(f)
    except FileNotFoundError:
        meta = {}
    perimeter = float(meta.get("perimeter", max(arcs) + 1.0))
    return Measurement(
        np.asarray(arcs), np.column_stack([xs, ys]), np.asarray(vals), perimeter, meta
    )
