import numpy as np
import pytest

from kvtopo.errors import GeometryError
from kvtopo.fem import CoefficientField, ProblemData, constant_fn
from kvtopo.kv import evaluate_k, solve_pair
from kvtopo.mesh import RectSpec, generate
from kvtopo.shapes import Circle
from kvtopo.synth import (
    Measurement,
    TrueScene,
    generate_measurement,
    load_measurement,
    save_measurement,
    trace_function,
    with_measurement,
)

from conftest import acceptance_gamma

SPEC = RectSpec(1.0, 1.0, 0.08, frozenset({"bottom", "right", "top"}))
DATA0 = ProblemData(acceptance_gamma(), constant_fn(0.0), constant_fn(1.0))


def scene_with(radius=None, center=(0.4, 0.4), h_true=0.04, spec=SPEC):
    obj = None if radius is None else Circle(center, radius)
    return TrueScene(spec, DATA0, obj, h_true)


class TestGenerateMeasurement:
    def test_no_object_consistency_on_matching_mesh(self):
        # With no object the samples are the background trace at h_true;
        # inverting on the same-resolution mesh reproduces them exactly, so
        # the misfit collapses to solver noise.
        scene = scene_with(radius=None)
        meas = generate_measurement(scene, 0.0, 0)
        inv_spec = scene.synthesis_spec()
        mesh = generate(inv_spec)
        data = with_measurement(DATA0, meas, inv_spec)
        assert evaluate_k(solve_pair(mesh, data)) <= 1e-8

    def test_determinism(self):
        scene = scene_with(0.15)
        a = generate_measurement(scene, 0.02, seed=42)
        b = generate_measurement(scene, 0.02, seed=42)
        assert np.array_equal(a.values, b.values)
        assert a.metadata == b.metadata

    def test_seed_changes_noise(self):
        scene = scene_with(0.15)
        a = generate_measurement(scene, 0.02, seed=1)
        b = generate_measurement(scene, 0.02, seed=2)
        assert not np.array_equal(a.values, b.values)

    def test_zero_noise_is_bit_exact_noiseless(self):
        scene = scene_with(0.15)
        a = generate_measurement(scene, 0.0, seed=1)
        b = generate_measurement(scene, 0.0, seed=99)
        assert np.array_equal(a.values, b.values)

    def test_noise_bounded_by_level(self):
        scene = scene_with(0.15)
        clean = generate_measurement(scene, 0.0, 0)
        noisy = generate_measurement(scene, 0.01, 0)
        delta = 0.01 * np.abs(clean.values).max()
        assert np.abs(noisy.values - clean.values).max() <= delta

    def test_object_produces_positive_k_regression(self):
        # Frozen full-pipeline value from this implementation (h = 0.05,
        # h_true = 0.02, disk r = 0.15 at (0.3, 0.2), flux 1).
        spec = RectSpec(1.0, 1.0, 0.05, frozenset({"bottom", "right", "top"}))
        scene = TrueScene(spec, DATA0, Circle((0.3, 0.2), 0.15), 0.02)
        meas = generate_measurement(scene, 0.0, 0)
        mesh = generate(spec)
        k = evaluate_k(solve_pair(mesh, with_measurement(DATA0, meas, spec)))
        assert k > 0
        assert k == pytest.approx(0.40463582795059116, rel=1e-8)

    def test_k_grows_with_object_size(self):
        ks = []
        for r in (0.05, 0.1, 0.2):
            scene = scene_with(r)
            meas = generate_measurement(scene, 0.0, 0)
            mesh = generate(SPEC)
            ks.append(evaluate_k(solve_pair(mesh, with_measurement(DATA0, meas, SPEC))))
        assert ks[0] < ks[1] < ks[2]

    def test_anti_inverse_crime_resolution_enforced(self):
        with pytest.raises(GeometryError, match="h_true"):
            TrueScene(SPEC, DATA0, Circle((0.4, 0.4), 0.15), h_true=0.06)

    def test_object_clearance_enforced(self):
        scene = scene_with(0.15, center=(0.9, 0.5), h_true=0.04)
        with pytest.raises(GeometryError, match="clearance"):
            generate_measurement(scene, 0.0, 0)

    def test_negative_noise_rejected(self):
        with pytest.raises(GeometryError):
            generate_measurement(scene_with(0.15), -0.1, 0)


class TestTraceFunction:
    def test_exact_at_sample_points(self):
        scene = scene_with(0.15)
        meas = generate_measurement(scene, 0.0, 0)
        fn = trace_function(meas, SPEC)
        got = fn(meas.points[:, 0], meas.points[:, 1])
        assert np.abs(got - meas.values).max() < 1e-12

    def test_interpolates_between_samples(self):
        meas = Measurement(
            arc=np.array([0.0, 1.0]),
            points=np.array([[0.0, 0.0], [1.0, 0.0]]),
            values=np.array([0.0, 2.0]),
            perimeter=4.0,
            metadata={},
        )
        fn = trace_function(meas, RectSpec(1.0, 1.0, 0.5, frozenset({"bottom"})))
        assert fn(np.array([0.25]), np.array([0.0]))[0] == pytest.approx(0.5)

    def test_gap_queries_clamp_to_nearest(self):
        # Samples cover the bottom side only; a query just past the last
        # sample (inside the gap) must clamp, not bridge the far side.
        arcs = np.linspace(0.0, 1.0, 11)
        meas = Measurement(
            arc=arcs,
            points=np.column_stack([arcs, np.zeros_like(arcs)]),
            values=np.linspace(0.0, 1.0, 11),
            perimeter=4.0,
            metadata={},
        )
        spec = RectSpec(1.0, 1.0, 0.5, frozenset({"bottom", "right"}))
        fn = trace_function(meas, spec)
        val = fn(np.array([1.0]), np.array([0.05]))  #右 side, arc = 1.05
        assert val[0] == pytest.approx(1.0)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        scene = scene_with(0.15)
        meas = generate_measurement(scene, 0.01, 7)
        path = tmp_path / "m.csv"
        save_measurement(meas, path, meta_header={"config_hash": "deadbeef"})
        loaded = load_measurement(path)
        assert np.array_equal(loaded.values, meas.values)
        assert np.array_equal(loaded.points, meas.points)
        assert loaded.perimeter == meas.perimeter
        assert loaded.metadata["seed"] == 7
        assert loaded.metadata["rng"] == "numpy.PCG64"

    def test_sidecar_written(self, tmp_path):
        meas = generate_measurement(scene_with(0.15), 0.0, 0)
        path = tmp_path / "m.csv"
        save_measurement(meas, path)
        assert (tmp_path / "m.csv.meta.json").exists()
