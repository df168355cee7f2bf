"""P1 finite elements for -div(gamma grad psi) = F with mixed boundary data.

Assembly follows the standard piecewise-linear element: the diffusion
coefficient is sampled at triangle centroids, volume loads use the 3-point
edge-midpoint rule (exact for quadratic integrands), Neumann fluxes use
2-point Gauss per boundary edge, and Dirichlet rows are eliminated
symmetrically. The solver is plain conjugate gradients with a Jacobi
preconditioner, deterministic and single-threaded.

All field callables are vectorized: fn(x, y) with 1-D arrays returns a 1-D
array of values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, SolveError
from .mesh import BoundaryTag, Mesh

FieldFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def constant_fn(value: float) -> FieldFn:
    def fn(x, y):
        return np.full(np.shape(x), float(value))

    return fn


@dataclass(frozen=True)
class CoefficientField:
    """Positive scalar coefficient with declared bounds c0 <= gamma <= c1."""

    fn: FieldFn
    c0: float
    c1: float

    def __post_init__(self):
        if not (0 < self.c0 <= self.c1):
            raise AssemblyError(
                f"coefficient bounds must satisfy 0 < c0 <= c1, got {self.c0}, {self.c1}"
            )

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.fn(x, y), dtype=float)
        tol = 1e-12 * max(1.0, self.c1)
        if vals.size and (vals.min() < self.c0 - tol or vals.max() > self.c1 + tol):
            raise AssemblyError(
                f"coefficient left its declared bounds [{self.c0}, {self.c1}]: "
                f"range [{vals.min():.6g}, {vals.max():.6g}]"
            )
        return vals

    @classmethod
    def constant(cls, value: float) -> "CoefficientField":
        return cls(constant_fn(value), value, value)


@dataclass(frozen=True)
class ProblemData:
    """Medium coefficient, volume source, imposed flux on Gamma_a, and the
    measured trace on Gamma_a (None while synthesizing data)."""

    gamma: CoefficientField
    source: FieldFn
    flux: FieldFn
    psi_m: FieldFn | None = None


@dataclass(frozen=True)
class Dirichlet:
    value: FieldFn


@dataclass(frozen=True)
class Neumann:
    flux: FieldFn


BC = Dirichlet | Neumann

# When a node is shared by edges of different Dirichlet tags, the earlier tag
# in this order wins. GAMMA_I first: its homogeneous condition is common to
# every problem, so junction nodes get identical values across solves.
_DIRICHLET_PRIORITY = (BoundaryTag.GAMMA_I, BoundaryTag.GAMMA_A, BoundaryTag.SIGMA)


@dataclass(frozen=True)
class BCSpec:
    """One condition per boundary tag; every tag present in the mesh must be
    covered and at least one of them must be Dirichlet."""

    conditions: dict[BoundaryTag, BC]

    def validate(self, mesh: Mesh) -> None:
        present = {t for t in BoundaryTag if mesh.has_tag(t)}
        missing = present - set(self.conditions)
        if missing:
            raise AssemblyError(
                f"no boundary condition for tags {sorted(t.value for t in missing)}"
            )
        if not any(
            isinstance(self.conditions[t], Dirichlet) for t in present
        ):
            raise AssemblyError(
                "singular system: no Dirichlet condition on any present tag"
            )


@dataclass(eq=False)
class ScalarField:
    """Nodal values of a piecewise-linear function on a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise AssemblyError(
                f"field length {self.values.shape} does not match mesh "
                f"({self.mesh.n_nodes} nodes)"
            )
        if not np.all(np.isfinite(self.values)):
            raise AssemblyError("field contains non-finite values")

    def at(self, points: np.ndarray) -> np.ndarray:
        """Evaluate by linear interpolation in the containing triangle."""
        tri_idx, bary = self.mesh.locate(points)
        if np.any(tri_idx < 0):
            bad = np.asarray(points)[tri_idx < 0][:1]
            raise AssemblyError(f"point {bad} lies outside the mesh")
        return np.einsum("ij,ij->i", self.values[self.mesh.triangles[tri_idx]], bary)


@dataclass(eq=False)
class SparseSystem:
    """Symmetric CSR system with Dirichlet rows reduced to the identity."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    mesh: Mesh

    def __post_init__(self):
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n) or self.rhs.shape != (n,):
            raise AssemblyError("system dimensions are inconsistent")
        defect = abs(self.matrix - self.matrix.T)
        scale = abs(self.matrix).max()
        if scale > 0 and defect.max() > 1e-12 * scale:
            raise AssemblyError(
                f"system matrix is not symmetric (defect {defect.max():.3e})"
            )


def _shape_coeffs(mesh: Mesh):
    """P1 geometry arrays: b, c with grad(phi_i) = (b_i, c_i) / (2A)."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    return b, c


def assemble(mesh: Mesh, data: ProblemData, bc: BCSpec) -> SparseSystem:
    """Assemble the stiffness matrix and load vector, apply the boundary
    conditions, and return the reduced symmetric system."""
    bc.validate(mesh)
    n_v = mesh.n_nodes
    tri = mesh.triangles
    areas = mesh.areas
    cent = mesh.centroids

    gamma_c = data.gamma(cent[:, 0], cent[:, 1])
    if np.any(gamma_c <= 0):
        raise AssemblyError("non-positive coefficient at a triangle centroid")

    b, c = _shape_coeffs(mesh)
    k_loc = (
        gamma_c[:, None, None]
        * (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :])
        / (4.0 * areas)[:, None, None]
    )
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    matrix = sp.coo_matrix(
        (k_loc.ravel(), (rows, cols)), shape=(n_v, n_v)
    ).tocsr()

    # Volume load by the edge-midpoint rule on each triangle.
    p = mesh.nodes[tri]
    m01 = 0.5 * (p[:, 0] + p[:, 1])
    m12 = 0.5 * (p[:, 1] + p[:, 2])
    m20 = 0.5 * (p[:, 2] + p[:, 0])
    f01 = data.source(m01[:, 0], m01[:, 1])
    f12 = data.source(m12[:, 0], m12[:, 1])
    f20 = data.source(m20[:, 0], m20[:, 1])
    rhs = np.zeros(n_v)
    w = areas / 6.0
    np.add.at(rhs, tri[:, 0], w * (f01 + f20))
    np.add.at(rhs, tri[:, 1], w * (f01 + f12))
    np.add.at(rhs, tri[:, 2], w * (f12 + f20))

    # Neumann edge loads: 2-point Gauss on each tagged edge.
    s_lo = 0.5 - 0.5 / np.sqrt(3.0)
    s_hi = 0.5 + 0.5 / np.sqrt(3.0)
    for tag, cond in bc.conditions.items():
        if not isinstance(cond, Neumann) or not mesh.has_tag(tag):
            continue
        edges = mesh.boundary_edges[mesh.boundary_tags == tag]
        pa, pb = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
        length = np.hypot(*(pb - pa).T)
        for s in (s_lo, s_hi):
            xg = pa + s * (pb - pa)
            phi = cond.flux(xg[:, 0], xg[:, 1]) * length * 0.5
            np.add.at(rhs, edges[:, 0], phi * (1.0 - s))
            np.add.at(rhs, edges[:, 1], phi * s)

    # Dirichlet nodes with deterministic priority at shared corners.
    dir_mask = np.zeros(n_v, dtype=bool)
    dir_vals = np.zeros(n_v)
    for tag in _DIRICHLET_PRIORITY:
        cond = bc.conditions.get(tag)
        if not isinstance(cond, Dirichlet) or not mesh.has_tag(tag):
            continue
        nodes = mesh.boundary_nodes(tag)
        nodes = nodes[~dir_mask[nodes]]
        pts = mesh.nodes[nodes]
        dir_vals[nodes] = cond.value(pts[:, 0], pts[:, 1])
        dir_mask[nodes] = True
    if not np.any(dir_mask):
        raise AssemblyError("singular system: no Dirichlet node found")

    # Symmetric elimination: move known values to the right-hand side, then
    # replace Dirichlet rows and columns by the identity.
    rhs = rhs - matrix @ (dir_vals * dir_mask)
    rhs[dir_mask] = dir_vals[dir_mask]
    free = sp.diags((~dir_mask).astype(float))
    matrix = free @ matrix @ free + sp.diags(dir_mask.astype(float))
    return SparseSystem(matrix.tocsr(), rhs, mesh)


def solve(system: SparseSystem, tol: float = 1e-10) -> ScalarField:
    """Jacobi-preconditioned conjugate gradients to relative residual tol.

    Raises SolveError on breakdown (non-SPD matrix) or when 10 * n iterations
    do not reach the tolerance.
    """
    a = system.matrix
    b = system.rhs
    n = a.shape[0]
    diag = a.diagonal()
    if np.any(diag <= 0):
        raise SolveError("matrix has non-positive diagonal entries")
    inv_diag = 1.0 / diag

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return ScalarField(system.mesh, np.zeros(n))

    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    max_iter = 10 * n
    for _ in range(max_iter):
        ap = a @ p
        pap = float(p @ ap)
        if pap <= 0.0:
            raise SolveError(
                "conjugate gradient breakdown: matrix is not positive definite",
                residual=float(np.linalg.norm(r)) / b_norm,
            )
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        res = float(np.linalg.norm(r))
        if res <= tol * b_norm:
            return ScalarField(system.mesh, x)
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolveError(
        f"conjugate gradient did not converge in {max_iter} iterations",
        residual=float(np.linalg.norm(r)) / b_norm,
    )


def recover_gradient(field: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Element gradients (exact P1) and area-weighted nodal averages.

    Returns
    -------
    elem_grads : (n_t, 2) array, constant gradient per triangle
    nodal_grads : (n_v, 2) array, area-weighted average over incident triangles
    """
    mesh = field.mesh
    tri = mesh.triangles
    b, c = _shape_coeffs(mesh)
    u = field.values[tri]
    inv2a = 1.0 / (2.0 * mesh.areas)
    gx = np.sum(u * b, axis=1) * inv2a
    gy = np.sum(u * c, axis=1) * inv2a
    elem = np.column_stack([gx, gy])

    wsum = np.zeros(mesh.n_nodes)
    acc = np.zeros((mesh.n_nodes, 2))
    for k in range(3):
        np.add.at(wsum, tri[:, k], mesh.areas)
        np.add.at(acc, tri[:, k], mesh.areas[:, None] * elem)
    nodal = acc / wsum[:, None]
    return elem, nodal
