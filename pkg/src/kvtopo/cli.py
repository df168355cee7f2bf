"""Command-line pipeline: mesh, synth, tgrad, reconstruct, polarization, sweep.

Every command reads a flat key-value config (--config), writes its artifacts
under the output directory (--out or output.dir), and prints a short
summary. Outputs carry the config hash and toolkit version; identical runs
produce byte-identical files.

Exit codes: 0 success, 2 configuration error, 3 numerical/geometry error,
4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymp import FAR_FIELD_NOTE, remainder_scaling, sweep
from .bem import PanelCurve, polarization_matrix
from .config import Config, build_data, build_domain, build_scene, build_shape
from .errors import (
    AssemblyError,
    ConfigError,
    GeometryError,
    MeshError,
    MeshParseError,
    SolveError,
    ToolkitError,
)
from .export import (
    write_cell_mask_vtk,
    write_field_csv,
    write_field_vtk,
    write_summary_json,
    write_table_csv,
)
from .fem import ProblemData, assemble, solve
from .kv import neumann_bc, solve_pair, topological_gradient
from .mesh import generate, save_mesh
from .recon import reconstruct
from .synth import (
    consistent_trace,
    generate_measurement,
    load_measurement,
    save_measurement,
    trace_function,
    with_measurement,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _load_config(args) -> tuple[Config, Path]:
    cfg = Config.load(args.config)
    if args.seed is not None:
        cfg.entries["scene.seed"] = str(args.seed)
    if args.out is not None:
        cfg.entries["output.dir"] = args.out
    outdir = Path(cfg.get_str("output.dir", "out"))
    outdir.mkdir(parents=True, exist_ok=True)
    return cfg, outdir


def _meta(cfg: Config) -> dict:
    return {"config_hash": cfg.digest()}


def _measured_data(cfg: Config, spec, data: ProblemData, outdir: Path) -> ProblemData:
    """Attach psi_m according to psi_m.source = consistent | file | synth."""
    source = cfg.get_str("psi_m.source", "synth")
    if source == "consistent":
        mesh = generate(spec)
        background = solve(assemble(mesh, data, neumann_bc(data)))
        return ProblemData(data.gamma, data.source, data.flux,
                           consistent_trace(mesh, background))
    if source == "file":
        measurement = load_measurement(cfg.get_str("psi_m.path"))
        return with_measurement(data, measurement, spec)
    if source == "synth":
        scene = build_scene(cfg, spec, data)
        measurement = generate_measurement(
            scene,
            noise_level=cfg.get_float("scene.noise", 0.0),
            seed=cfg.get_int("scene.seed", 0),
        )
        return with_measurement(data, measurement, spec)
    raise ConfigError(
        f"psi_m.source: expected consistent|file|synth, got {source!r}"
    )


def cmd_mesh(args) -> int:
    cfg, outdir = _load_config(args)
    spec = build_domain(cfg)
    mesh = generate(spec)
    path = outdir / "mesh.txt"
    save_mesh(mesh, path)
    print(f"mesh: {mesh.n_nodes} nodes, {mesh.n_triangles} triangles -> {path}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg, outdir = _load_config(args)
    spec = build_domain(cfg)
    data = build_data(cfg, spec)
    scene = build_scene(cfg, spec, data)
    measurement = generate_measurement(
        scene,
        noise_level=cfg.get_float("scene.noise", 0.0),
        seed=cfg.get_int("scene.seed", 0),
    )
    path = outdir / "measurement.csv"
    save_measurement(measurement, path, meta_header=_meta(cfg))
    print(
        f"synth: {len(measurement.values)} samples on the accessible boundary "
        f"-> {path} (+ sidecar)"
    )
    return EXIT_OK


def _tgrad_pipeline(cfg: Config, outdir: Path):
    spec = build_domain(cfg)
    data = build_data(cfg, spec)
    data = _measured_data(cfg, spec, data, outdir)
    mesh = generate(spec)
    pair = solve_pair(mesh, data)
    clearance = cfg.get_float("recon.clearance_factor", 5.0)
    tg = topological_gradient(pair, clearance_factor=clearance)
    return spec, data, mesh, tg


def _tgrad_summary(cfg: Config, tg) -> dict:
    node = tg.argmin_node
    xy = tg.pair.mesh.nodes[node]
    return {
        "config_hash": cfg.digest(),
        "version": __version__,
        "K_value": tg.k_value,
        "min_deltaK": tg.min_delta_k,
        "argmin_node": int(node),
        "argmin_xy": [float(xy[0]), float(xy[1])],
    }


def cmd_tgrad(args) -> int:
    cfg, outdir = _load_config(args)
    _, _, mesh, tg = _tgrad_pipeline(cfg, outdir)
    write_field_csv(tg.delta_k, outdir / "deltaK.csv", meta=_meta(cfg))
    write_field_vtk(tg.delta_k, outdir / "deltaK.vtk", name="deltaK")
    summary = _tgrad_summary(cfg, tg)
    write_summary_json(summary, outdir / "tgrad_summary.json")
    print(
        f"tgrad: K={summary['K_value']:.6e} min(deltaK)={summary['min_deltaK']:.6e} "
        f"at node {summary['argmin_node']} {summary['argmin_xy']}"
    )
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg, outdir = _load_config(args)
    spec, data, mesh, tg = _tgrad_pipeline(cfg, outdir)
    fractions = tuple(cfg.get_floats("recon.candidates", "0.2 0.4 0.6 0.8"))
    true_shape = build_shape(cfg)
    rec = reconstruct(tg, data, candidates=fractions, true_shape=true_shape)

    mask = np.zeros(mesh.n_triangles, dtype=int)
    mask[rec.object_elements] = 1
    write_cell_mask_vtk(mesh, mask, outdir / "object_cells.vtk")
    write_field_vtk(tg.delta_k, outdir / "deltaK.vtk", name="deltaK")
    write_table_csv(
        ["fraction", "level", "n_elements", "K_after", "note"],
        [[c.fraction, c.level, c.n_elements, c.k_after, c.note] for c in rec.candidates],
        outdir / "candidates.csv",
        meta=_meta(cfg),
    )
    summary = {
        "config_hash": cfg.digest(),
        "version": __version__,
        "indicated": rec.indicated,
        "chosen_c": rec.chosen_c,
        "n_elements": int(len(rec.object_elements)),
        "K_before": rec.k_before,
        "K_after": rec.k_after,
        "center_estimate": None
        if rec.center_estimate is None
        else [float(v) for v in rec.center_estimate],
        "jaccard": rec.jaccard_index,
        "center_error": rec.center_error,
    }
    write_summary_json(summary, outdir / "reconstruction.json")
    if rec.indicated:
        print(
            f"reconstruct: {summary['n_elements']} elements, "
            f"K {rec.k_before:.6e} -> {rec.k_after:.6e}, "
            f"center {summary['center_estimate']}"
        )
    else:
        print("reconstruct: no object indicated")
    return EXIT_OK


def cmd_polarization(args) -> int:
    cfg, outdir = _load_config(args)
    kind = cfg.get_str("polar.shape", "circle")
    panels = cfg.get_int("polar.panels", 256)
    if panels < 12:
        raise ConfigError(f"polar.panels: need at least 12 panels, got {panels}")

    def curve(n: int) -> PanelCurve:
        if kind == "circle":
            return PanelCurve.circle(cfg.get_float("polar.radius", 1.0), n)
        if kind == "ellipse":
            return PanelCurve.ellipse(
                cfg.get_float("polar.a"),
                cfg.get_float("polar.b"),
                n,
                angle=cfg.get_float("polar.angle", 0.0),
            )
        raise ConfigError(f"polar.shape: expected circle|ellipse, got {kind!r}")

    history = []
    for n in (max(12, panels // 4), max(12, panels // 2), panels):
        m = polarization_matrix(curve(n))
        history.append(
            [n, m.matrix[0, 0], m.matrix[0, 1], m.matrix[1, 0], m.matrix[1, 1]]
        )
    final = history[-1]
    write_table_csv(
        ["panels", "M11", "M12", "M21", "M22"],
        history,
        outdir / "polarization.csv",
        meta=_meta(cfg),
    )
    print(f"polarization matrix ({kind}, {panels} panels):")
    print(f"  [{final[1]: .8f}  {final[2]: .8f}]")
    print(f"  [{final[3]: .8f}  {final[4]: .8f}]")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, outdir = _load_config(args)
    spec = build_domain(cfg)
    data = build_data(cfg, spec)
    data = _measured_data(cfg, spec, data, outdir)
    eps_list = cfg.get_floats("sweep.eps", "0.1 0.07 0.05 0.035 0.025")
    if not eps_list:
        raise ConfigError("sweep.eps: empty epsilon list")

    if cfg.get_str("sweep.z", "argmin") == "argmin":
        mesh = generate(spec)
        tg = topological_gradient(solve_pair(mesh, data))
        admissible = tg.interior_mask & (
            spec.boundary_distance(mesh.nodes) >= 3.0 * max(eps_list)
        )
        if not np.any(admissible):
            raise GeometryError("no admissible sweep point for the largest epsilon")
        vals = np.where(admissible, tg.delta_k.values, np.inf)
        zi = int(np.argmin(vals))
        z = (float(mesh.nodes[zi, 0]), float(mesh.nodes[zi, 1]))
    else:
        z = (cfg.get_float("sweep.z_x"), cfg.get_float("sweep.z_y"))

    report = sweep(spec, data, z, eps_list)
    footer = []
    if report.fitted_slope is not None:
        footer.append(
            f"fitted_slope={report.fitted_slope:.6g} stderr={report.slope_stderr:.3g}"
        )
    footer.extend(f"skipped eps={e}: {why}" for e, why in report.skipped)
    write_table_csv(
        ["eps", "measured", "predicted", "ratio"],
        [
            [e, m, p, r]
            for e, m, p, r in zip(
                report.eps_list, report.measured, report.predicted, report.ratios
            )
        ],
        outdir / "sweep.csv",
        meta={**_meta(cfg), "z": f"{z[0]:.17g} {z[1]:.17g}"},
        footer=footer,
    )
    print(
        f"sweep at z={z}: {len(report.eps_list)} epsilons, "
        f"slope={report.fitted_slope}, skipped={len(report.skipped)}"
    )

    if cfg.get_str("sweep.remainder", "false") == "true":
        rem = remainder_scaling(spec, data, z, eps_list)
        write_table_csv(
            ["eps", "far_field_h1"],
            [[e, n] for e, n in zip(rem.eps_list, rem.norms)],
            outdir / "remainder.csv",
            meta={**_meta(cfg), "note": FAR_FIELD_NOTE, "R": f"{rem.radius:.17g}"},
            footer=[f"exponent={rem.exponent}"],
        )
        print(f"remainder: exponent={rem.exponent} (R={rem.radius})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kvtopo",
        description="Object detection from boundary data via the topological "
        "gradient of an energy misfit.",
    )
    parser.add_argument("--version", action="version", version=f"kvtopo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("mesh", cmd_mesh),
        ("synth", cmd_synth),
        ("tgrad", cmd_tgrad),
        ("reconstruct", cmd_reconstruct),
        ("polarization", cmd_polarization),
        ("sweep", cmd_sweep),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the run config")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="scene seed override")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeshParseError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MeshError, GeometryError, AssemblyError, SolveError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
