"""Forward pair, energy misfit, and its topological gradient.

Two forward problems share the volume equation -div(gamma grad psi) = F and
the homogeneous Dirichlet condition on the inaccessible boundary: the
"Neumann" solution takes the imposed flux on the accessible boundary, the
"Dirichlet" solution takes the measured trace there. Holes (SIGMA) are
insulating in both. The misfit

    K = integral gamma |grad psi_D - grad psi_N|^2

vanishes exactly when the trial geometry reproduces both measurements. Its
sensitivity to inserting a small disk at a point x is, per unit of the
expansion 2*pi*eps^2,

    dK(x) = gamma(x) (|grad psi_N|^2 - |grad psi_D|^2) - F(x) (psi_N - psi_D)

evaluated from nodal recovered gradients at interior nodes. The general
formula for a reference shape with polarization matrix M and area |w| is
also provided; with M = 2*pi*I and |w| = pi it reduces to 2*pi times the
disk formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError, GeometryError
from .fem import (
    BCSpec,
    Dirichlet,
    Neumann,
    ProblemData,
    ScalarField,
    assemble,
    constant_fn,
    recover_gradient,
    solve,
)
from .mesh import BoundaryTag, Mesh


@dataclass(eq=False)
class ForwardPair:
    """Solutions of the flux-driven and trace-driven problems on one mesh."""

    psi_n: ScalarField
    psi_d: ScalarField
    mesh: Mesh
    data: ProblemData

    def __post_init__(self):
        if self.psi_n.mesh is not self.mesh or self.psi_d.mesh is not self.mesh:
            raise AssemblyError("forward pair fields live on different meshes")


@dataclass(eq=False)
class TopGradResult:
    """Topological gradient field with the misfit value of the trial domain.

    deltaK holds the nodal gradient values; boundary nodes are masked out
    (interior_mask False) and carry the value 0.
    """

    pair: ForwardPair
    k_value: float
    delta_k: ScalarField
    interior_mask: np.ndarray

    @property
    def argmin_node(self) -> int:
        vals = np.where(self.interior_mask, self.delta_k.values, np.inf)
        return int(np.argmin(vals))

    @property
    def min_delta_k(self) -> float:
        return float(self.delta_k.values[self.argmin_node])


def neumann_bc(data: ProblemData) -> BCSpec:
    return BCSpec(
        {
            BoundaryTag.GAMMA_A: Neumann(data.flux),
            BoundaryTag.GAMMA_I: Dirichlet(constant_fn(0.0)),
            BoundaryTag.SIGMA: Neumann(constant_fn(0.0)),
        }
    )


def dirichlet_bc(data: ProblemData) -> BCSpec:
    if data.psi_m is None:
        raise AssemblyError("problem data has no measured trace psi_m")
    return BCSpec(
        {
            BoundaryTag.GAMMA_A: Dirichlet(data.psi_m),
            BoundaryTag.GAMMA_I: Dirichlet(constant_fn(0.0)),
            BoundaryTag.SIGMA: Neumann(constant_fn(0.0)),
        }
    )


def solve_pair(mesh: Mesh, data: ProblemData) -> ForwardPair:
    """Solve both forward problems on the given trial mesh."""
    for tag in (BoundaryTag.GAMMA_A, BoundaryTag.GAMMA_I):
        if not mesh.has_tag(tag):
            raise AssemblyError(f"mesh has no {tag.value} boundary")
    psi_n = solve(assemble(mesh, data, neumann_bc(data)))
    psi_d = solve(assemble(mesh, data, dirichlet_bc(data)))
    return ForwardPair(psi_n, psi_d, mesh, data)


def evaluate_k(pair: ForwardPair) -> float:
    """Energy misfit: sum over triangles of area * gamma(centroid) *
    |grad psi_D - grad psi_N|^2 with exact P1 gradients."""
    mesh = pair.mesh
    grad_n = recover_gradient(pair.psi_n)[0]
    grad_d = recover_gradient(pair.psi_d)[0]
    cent = mesh.centroids
    gamma_c = pair.data.gamma(cent[:, 0], cent[:, 1])
    diff = grad_d - grad_n
    return float(np.sum(mesh.areas * gamma_c * np.sum(diff * diff, axis=1)))


def disk_gradient_formula(
    dim: int,
    gamma: np.ndarray,
    grad_n: np.ndarray,
    grad_d: np.ndarray,
    source: np.ndarray,
    psi_n: np.ndarray,
    psi_d: np.ndarray,
) -> np.ndarray:
    """Pointwise topological gradient for a ball-shaped trial object.

    dim selects the 2D or 3D variant; only the source-term weight differs
    (1 versus 4/3). Gradient arrays have shape (n, dim).
    """
    if dim not in (2, 3):
        raise GeometryError(f"dimension must be 2 or 3, got {dim}")
    weight = 1.0 if dim == 2 else 4.0 / 3.0
    gn2 = np.sum(np.atleast_2d(grad_n) ** 2, axis=-1)
    gd2 = np.sum(np.atleast_2d(grad_d) ** 2, axis=-1)
    return gamma * (gn2 - gd2) - weight * source * (psi_n - psi_d)


def _nodal_inputs(pair: ForwardPair):
    mesh = pair.mesh
    _, grad_n = recover_gradient(pair.psi_n)
    _, grad_d = recover_gradient(pair.psi_d)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    gamma_v = pair.data.gamma(x, y)
    source_v = np.asarray(pair.data.source(x, y), dtype=float)
    return grad_n, grad_d, gamma_v, source_v


def candidate_mask(mesh: Mesh, clearance_factor: float = 5.0) -> np.ndarray:
    """Nodes eligible to host a trial object.

    Boundary nodes never qualify. A hole the mesh can actually resolve has
    radius of at least an edge length and needs clearance of a few radii
    from the boundary, so nodes within clearance_factor typical boundary
    edge lengths of the boundary are not candidate locations either; the
    measured-trace layer along the accessible boundary also makes gradient
    values there untrustworthy.
    """
    interior = mesh.interior_node_mask
    if clearance_factor <= 0:
        return interior.copy()
    from scipy.spatial import cKDTree

    outer = mesh.boundary_tags != BoundaryTag.SIGMA
    edges = mesh.boundary_edges[outer] if np.any(outer) else mesh.boundary_edges
    lengths = np.hypot(*(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]]).T)
    depth = clearance_factor * float(np.median(lengths))
    bnodes = mesh.nodes[mesh.boundary_node_mask]
    dist, _ = cKDTree(bnodes).query(mesh.nodes)
    return interior & (dist >= depth * (1.0 - 1e-9))


def topological_gradient(
    pair: ForwardPair, clearance_factor: float = 5.0
) -> TopGradResult:
    """Nodal gradient field for a disk-shaped trial object (2D formula).

    Values are computed at every non-boundary node (boundary nodes carry 0:
    recovered gradients there are first-order degraded). interior_mask marks
    the nodes eligible for thresholding, see candidate_mask.
    """
    mesh = pair.mesh
    grad_n, grad_d, gamma_v, source_v = _nodal_inputs(pair)
    dk = disk_gradient_formula(
        2, gamma_v, grad_n, grad_d, source_v, pair.psi_n.values, pair.psi_d.values
    )
    dk = np.where(mesh.interior_node_mask, dk, 0.0)
    return TopGradResult(
        pair=pair,
        k_value=evaluate_k(pair),
        delta_k=ScalarField(mesh, dk),
        interior_mask=candidate_mask(mesh, clearance_factor),
    )


def general_topological_gradient(
    pair: ForwardPair,
    polarization: np.ndarray,
    omega_area: float,
    clearance_factor: float = 5.0,
) -> TopGradResult:
    """Nodal gradient field for an arbitrary reference shape.

    Both polarization-form arguments are evaluated at the same node. With
    polarization = 2*pi*I and omega_area = pi the result is exactly 2*pi
    times the disk formula field.
    """
    m = np.asarray(polarization, dtype=float)
    if m.shape != (2, 2):
        raise GeometryError(f"polarization matrix must be 2x2, got {m.shape}")
    if abs(m[0, 1] - m[1, 0]) > 1e-8 * max(1.0, float(np.abs(m).max())):
        raise GeometryError("polarization matrix must be symmetric")
    if omega_area < 0:
        raise GeometryError("reference shape area must be nonnegative")

    mesh = pair.mesh
    grad_n, grad_d, gamma_v, source_v = _nodal_inputs(pair)
    quad_n = np.einsum("ni,ij,nj->n", grad_n, m, grad_n)
    quad_d = np.einsum("ni,ij,nj->n", grad_d, m, grad_d)
    dk = gamma_v * (quad_n - quad_d) - 2.0 * omega_area * source_v * (
        pair.psi_n.values - pair.psi_d.values
    )
    dk = np.where(mesh.interior_node_mask, dk, 0.0)
    return TopGradResult(
        pair=pair,
        k_value=evaluate_k(pair),
        delta_k=ScalarField(mesh, dk),
        interior_mask=candidate_mask(mesh, clearance_factor),
    )
