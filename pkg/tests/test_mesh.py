import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvtopo.errors import GeometryError, MeshError, MeshParseError
from kvtopo.mesh import (
    BoundaryTag,
    DiskSpec,
    Perturbation,
    RectSpec,
    generate,
    generate_disk_mesh,
    load_mesh,
    mesh_with_hole,
    puncture,
    save_mesh,
    validate_mesh,
)
from kvtopo.shapes import Circle, Ellipse


def inscribed_polygon_area(n: int, radius: float = 1.0) -> float:
    # Area of the regular n-gon inscribed in a circle: (n/2) sin(2 pi / n) r^2.
    return 0.5 * n * np.sin(2 * np.pi / n) * radius**2


def boundary_loop_area(mesh) -> float:
    pa = mesh.nodes[mesh.boundary_edges[:, 0]]
    pb = mesh.nodes[mesh.boundary_edges[:, 1]]
    return 0.5 * float(np.sum(pa[:, 0] * pb[:, 1] - pb[:, 0] * pa[:, 1]))


class TestDiskGeneration:
    def test_coarse_disk_sanity(self):
        mesh = generate_disk_mesh(1.0, 0.5, (0.0, np.pi))
        assert mesh.n_triangles >= 12
        assert mesh.has_tag(BoundaryTag.GAMMA_A)
        assert mesh.has_tag(BoundaryTag.GAMMA_I)

    def test_fine_disk_area_close_to_pi(self):
        mesh = generate_disk_mesh(1.0, 0.05, (0.0, np.pi))
        total = float(np.sum(mesh.areas))
        assert abs(total - np.pi) / np.pi < 0.02
        # The mesh area equals the inscribed boundary polygon area exactly.
        n_b = int(np.sum(mesh.boundary_tags != BoundaryTag.SIGMA))
        assert total == pytest.approx(inscribed_polygon_area(n_b), rel=1e-12)

    def test_coarse_h_rejected(self):
        with pytest.raises(GeometryError):
            generate_disk_mesh(1.0, 1.5, (0.0, np.pi))

    @pytest.mark.parametrize("arc", [(0.0, 0.0), (0.3, 0.3 + 2 * np.pi)])
    def test_empty_or_full_arc_rejected(self, arc):
        with pytest.raises(GeometryError):
            DiskSpec(1.0, 0.2, arc)

    def test_max_edge_contract(self):
        for h in (0.3, 0.1, 0.05):
            mesh = generate_disk_mesh(1.0, h, (0.0, np.pi))
            assert mesh.max_edge_length <= 1.5 * h

    def test_wrapping_arc(self):
        mesh = generate_disk_mesh(1.0, 0.1, (1.5 * np.pi, 0.5 * np.pi))
        mids = 0.5 * (
            mesh.nodes[mesh.boundary_edges[:, 0]] + mesh.nodes[mesh.boundary_edges[:, 1]]
        )
        ga = mesh.boundary_tags == BoundaryTag.GAMMA_A
        assert np.all(mids[ga, 0] > 0)  # the arc through angle 0 is the x>0 half
        assert np.all(mids[~ga, 0] < 0)


class TestPuncture:
    def test_punctured_disk_area(self):
        spec = DiskSpec(1.0, 0.1, (0.0, np.pi))
        mesh = puncture(spec, Perturbation((0.0, 0.0), 0.2, 32))
        expected = np.pi - inscribed_polygon_area(32, 0.2)
        total = float(np.sum(mesh.areas))
        assert abs(total - expected) / expected < 0.02
        # Exact identity against the realized boundary polygons.
        assert total == pytest.approx(boundary_loop_area(mesh), rel=1e-12)

    def test_clearance_violation(self):
        spec = DiskSpec(1.0, 0.1, (0.0, np.pi))
        with pytest.raises(GeometryError):
            puncture(spec, Perturbation((0.95, 0.0), 0.2, 32))

    def test_sigma_nodes_on_hole_polygon(self):
        spec = DiskSpec(1.0, 0.1, (0.0, np.pi))
        hole = Perturbation((0.3, 0.1), 0.05, 16)
        mesh = puncture(spec, hole)
        poly = hole.polygon()
        sigma_edges = mesh.boundary_edges[mesh.boundary_tags == BoundaryTag.SIGMA]
        pts = mesh.nodes[np.unique(sigma_edges)]
        dists = np.min(
            np.hypot(pts[:, None, 0] - poly[None, :, 0], pts[:, None, 1] - poly[None, :, 1]),
            axis=1,
        )
        assert len(pts) == hole.n_segments
        assert np.max(dists) <= 1e-12

    def test_outer_tags_preserved(self):
        spec = RectSpec(1.0, 1.0, 0.1, frozenset({"bottom", "right"}))
        plain = generate(spec)
        punct = puncture(spec, Perturbation((0.5, 0.5), 0.08, 20))

        def outer_tagged(mesh):
            keep = mesh.boundary_tags != BoundaryTag.SIGMA
            edges = mesh.boundary_edges[keep]
            mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
            order = np.lexsort((mids[:, 1], mids[:, 0]))
            return mids[order], mesh.boundary_tags[keep][order]

        mids_a, tags_a = outer_tagged(plain)
        mids_b, tags_b = outer_tagged(punct)
        assert np.allclose(mids_a, mids_b)
        assert all(x == y for x, y in zip(tags_a, tags_b))

    def test_background_triangulation_reused(self):
        # Triangles beyond the graded refinement zone (radius ~ eps + 4.5h)
        # must be identical to the plain mesh: the point sets agree there and
        # the Delaunay triangulation of a generic point set is unique.
        spec = RectSpec(1.0, 1.0, 0.05, frozenset({"bottom", "right", "top"}))
        plain = generate(spec)
        punct = puncture(spec, Perturbation((0.5, 0.5), 0.04, 20))

        def far_triangles(mesh):
            cent = mesh.centroids
            far = np.hypot(cent[:, 0] - 0.5, cent[:, 1] - 0.5) > 0.35
            out = set()
            for tri in mesh.nodes[mesh.triangles[far]]:
                out.add(tuple(sorted((round(x, 12), round(y, 12)) for x, y in tri)))
            return out

        plain_far = far_triangles(plain)
        assert plain_far  # the comparison region is nonempty
        assert plain_far == far_triangles(punct)

    def test_bad_perturbation_params(self):
        with pytest.raises(GeometryError):
            Perturbation((0, 0), -0.1, 16)
        with pytest.raises(GeometryError):
            Perturbation((0, 0), 0.1, 8)


class TestShapedHoles:
    @pytest.mark.parametrize(
        "shape",
        [
            Circle((0.5, 0.5), 0.2),
            Ellipse((0.5, 0.5), 0.25, 0.12, angle=0.4),
        ],
    )
    def test_mesh_with_hole_area(self, shape):
        spec = RectSpec(1.0, 1.0, 0.05, frozenset({"bottom", "right", "top"}))
        mesh = mesh_with_hole(spec, shape)
        total = float(np.sum(mesh.areas))
        assert abs(total - (1.0 - shape.area())) < 0.02 * shape.area() + 5e-3
        assert mesh.has_tag(BoundaryTag.SIGMA)


class TestValidation:
    def test_interior_edges_used_twice(self, unit_square_mesh):
        mesh = unit_square_mesh
        counts = {}
        for tri in mesh.triangles:
            for i, j in ((0, 1), (1, 2), (2, 0)):
                key = tuple(sorted((tri[i], tri[j])))
                counts[key] = counts.get(key, 0) + 1
        boundary = {
            tuple(sorted(edge)) for edge in mesh.boundary_edges.tolist()
        }
        for key, count in counts.items():
            assert count == (1 if key in boundary else 2)

    def test_area_identity(self, unit_square_mesh):
        total = float(np.sum(unit_square_mesh.areas))
        assert total == pytest.approx(boundary_loop_area(unit_square_mesh), rel=1e-12)

    def test_mismatched_boundary_rejected(self, unit_square_mesh):
        from kvtopo.mesh import Mesh

        bad = Mesh(
            unit_square_mesh.nodes,
            unit_square_mesh.triangles,
            unit_square_mesh.boundary_edges[:-1],
            unit_square_mesh.boundary_tags[:-1],
        )
        with pytest.raises(MeshError):
            validate_mesh(bad)


class TestTextFormat:
    def test_round_trip(self, tmp_path):
        spec = DiskSpec(1.0, 0.2, (0.0, np.pi))
        mesh = puncture(spec, Perturbation((0.2, 0.1), 0.1, 16))
        path = tmp_path / "mesh.txt"
        save_mesh(mesh, path)
        loaded = load_mesh(path)
        assert np.array_equal(loaded.nodes, mesh.nodes)
        assert np.array_equal(loaded.triangles, mesh.triangles)
        assert np.array_equal(loaded.boundary_edges, mesh.boundary_edges)
        assert all(a == b for a, b in zip(loaded.boundary_tags, mesh.boundary_tags))

    def test_out_of_range_index_names_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text(
            "nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 3\nboundary 3\n0 1 GAMMA_A\n1 2 GAMMA_A\n2 0 GAMMA_I\n"
        )
        with pytest.raises(MeshParseError) as err:
            load_mesh(path)
        assert err.value.line_no == 6  # the offending triangle line

    def test_clockwise_triangle_reports_negative_area(self, tmp_path):
        path = tmp_path / "cw.txt"
        path.write_text(
            "nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 2 1\nboundary 3\n0 2 GAMMA_A\n2 1 GAMMA_A\n1 0 GAMMA_I\n"
        )
        with pytest.raises(MeshError, match="negative area"):
            load_mesh(path)

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text(
            "# a comment\nnodes 3\n\n0 0\n1 0  # inline\n0 1\n"
            "triangles 1\n0 1 2\nboundary 3\n0 1 GAMMA_A\n1 2 GAMMA_A\n2 0 GAMMA_I\n"
        )
        mesh = load_mesh(path)
        assert mesh.n_nodes == 3

    def test_unknown_tag(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text(
            "nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\nboundary 3\n0 1 WHAT\n1 2 GAMMA_A\n2 0 GAMMA_I\n"
        )
        with pytest.raises(MeshParseError):
            load_mesh(path)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "short.txt"
        path.write_text("nodes 3\n0 0\n1 0\n")
        with pytest.raises(MeshParseError):
            load_mesh(path)


@settings(max_examples=8, deadline=None)
@given(
    h=st.floats(0.08, 0.3),
    radius=st.floats(0.6, 1.8),
    start=st.floats(0.0, 6.0),
    span=st.floats(0.8, 5.0),
)
def test_generated_disks_satisfy_invariants(h, radius, start, span):
    if h >= radius:
        return
    mesh = generate(DiskSpec(radius, h, (start, (start + span) % (2 * np.pi))))
    validate_mesh(mesh)
    assert float(np.sum(mesh.areas)) == pytest.approx(
        boundary_loop_area(mesh), rel=1e-12
    )
    assert mesh.max_edge_length <= 1.5 * h
