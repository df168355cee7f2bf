"""Shared fixtures and helpers for the kvtopo test suite."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from kvtopo.fem import (
    BCSpec,
    CoefficientField,
    Dirichlet,
    Neumann,
    ProblemData,
    assemble,
    constant_fn,
    solve,
)
from kvtopo.kv import neumann_bc, solve_pair
from kvtopo.mesh import BoundaryTag, Mesh, RectSpec, generate
from kvtopo.shapes import Circle
from kvtopo.synth import (
    TrueScene,
    consistent_trace,
    generate_measurement,
    with_measurement,
)


def two_triangle_square() -> Mesh:
    """Hand-built unit square: nodes (0,0),(1,0),(1,1),(0,1), split along the
    main diagonal. Dirichlet side = bottom+right (GAMMA_A), Neumann side =
    top+left (GAMMA_I)."""
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    triangles = np.array([[0, 1, 2], [0, 2, 3]])
    edges = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    tags = np.array(
        [
            BoundaryTag.GAMMA_A,
            BoundaryTag.GAMMA_A,
            BoundaryTag.GAMMA_I,
            BoundaryTag.GAMMA_I,
        ],
        dtype=object,
    )
    return Mesh(nodes, triangles, edges, tags)


def x_fn(x, y):
    return np.asarray(x, dtype=float) + 0.0 * np.asarray(y, dtype=float)


def flux_for_unit_x(x, y):
    """Flux of psi = x (gamma = 1) on the unit square boundary: 1 on the
    right side, 0 on bottom and top."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[np.abs(x - 1.0) < 1e-9] = 1.0
    return out


@pytest.fixture(scope="session")
def unit_square_spec():
    return RectSpec(1.0, 1.0, 0.05, frozenset({"bottom", "right", "top"}))


@pytest.fixture(scope="session")
def unit_square_mesh(unit_square_spec):
    return generate(unit_square_spec)


def acceptance_flux(x, y):
    """Flux jet entering through the right wall, quiet near the corners."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.exp(-((x - 1.0) ** 2 + (y - 0.4) ** 2) / (2 * 0.2**2))


def acceptance_gamma() -> CoefficientField:
    return CoefficientField(lambda x, y: 1.0 + 0.5 * np.asarray(x, dtype=float), 1.0, 1.5)


@pytest.fixture(scope="session")
def object_scenario():
    """Criterion-4 scenario at a runtime-friendly resolution (h = 0.04)."""
    spec = RectSpec(1.0, 1.0, 0.04, frozenset({"bottom", "right", "top"}))
    data0 = ProblemData(acceptance_gamma(), constant_fn(0.0), acceptance_flux)
    shape = Circle((0.3, 0.2), 0.15)
    scene = TrueScene(spec, data0, shape, 0.02)
    measurement = generate_measurement(scene, 0.0, 0)
    data = with_measurement(data0, measurement, spec)
    mesh = generate(spec)
    pair = solve_pair(mesh, data)
    return {
        "spec": spec,
        "mesh": mesh,
        "data": data,
        "pair": pair,
        "shape": shape,
        "scene": scene,
    }


def consistent_problem(mesh, data0: ProblemData) -> ProblemData:
    """Attach the mesh's own background trace as the measured datum."""
    background = solve(assemble(mesh, data0, neumann_bc(data0)))
    return replace(data0, psi_m=consistent_trace(mesh, background))
