"""Plot-ready exports: CSV tables, legacy ASCII VTK, JSON summaries.

Every file starts with metadata (config hash, toolkit version) so outputs
are traceable; no timestamps, so identical runs produce identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

from . import __version__
from .fem import ScalarField
from .mesh import Mesh


def _comment_header(meta: dict | None) -> list[str]:
    lines = [f"# version={__version__}"]
    for key, val in (meta or {}).items():
        lines.append(f"# {key}={val}")
    return lines


def write_field_csv(field: ScalarField, path, meta: dict | None = None) -> None:
    """CSV rows: node_index,x,y,value."""
    lines = _comment_header(meta)
    lines.append("node_index,x,y,value")
    for i, ((x, y), v) in enumerate(zip(field.mesh.nodes, field.values)):
        lines.append(f"{i},{x:.17g},{y:.17g},{v:.17g}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _vtk_mesh_block(mesh: Mesh, title: str) -> list[str]:
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    lines.extend(f"{x:.17g} {y:.17g} 0" for x, y in mesh.nodes)
    lines.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    lines.extend(f"3 {i} {j} {k}" for i, j, k in mesh.triangles)
    lines.append(f"CELL_TYPES {mesh.n_triangles}")
    lines.extend("5" for _ in range(mesh.n_triangles))
    return lines


def write_field_vtk(field: ScalarField, path, name: str = "field", title: str = "kvtopo field") -> None:
    """Legacy ASCII VTK with one POINT_DATA scalar array."""
    lines = _vtk_mesh_block(field.mesh, title)
    lines.append(f"POINT_DATA {field.mesh.n_nodes}")
    lines.append(f"SCALARS {name} double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(f"{v:.17g}" for v in field.values)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_cell_mask_vtk(
    mesh: Mesh, mask: np.ndarray, path, name: str = "selected", title: str = "kvtopo cells"
) -> None:
    """Legacy ASCII VTK with one CELL_DATA integer array (0/1 mask)."""
    lines = _vtk_mesh_block(mesh, title)
    lines.append(f"CELL_DATA {mesh.n_triangles}")
    lines.append(f"SCALARS {name} int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(int(v)) for v in mask)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_summary_json(record: dict, path) -> None:
    with open(path, "w") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")


def write_table_csv(
    header: list[str], rows: list[list], path, meta: dict | None = None,
    footer: list[str] | None = None,
) -> None:
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return f"{v:.17g}"
        return str(v)

    lines = _comment_header(meta)
    lines.append(",".join(header))
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    for extra in footer or []:
        lines.append(f"# {extra}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
