"""Flat key-value run configuration.

Format: one `key = value` per line, dotted section names, '#' comments,
blank lines ignored. Keys keep their first-seen order; serialization
round-trips byte-exactly for files written by this module.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .catalog import FAMILIES, make_coefficient, make_field
from .errors import ConfigError
from .fem import ProblemData
from .mesh import DiskSpec, MeshSpec, RectSpec
from .shapes import Circle, Ellipse, Polygon, Shape
from .synth import TrueScene


@dataclass(eq=False)
class Config:
    """Ordered flat mapping of dotted keys to raw string values."""

    entries: dict[str, str] = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "Config":
        entries: dict[str, str] = {}
        for no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {no}: expected 'key = value', got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            value = value.strip()
            if not key:
                raise ConfigError(f"line {no}: empty key")
            if key in entries:
                raise ConfigError(f"line {no}: duplicate key {key!r}")
            entries[key] = value
        return cls(entries)

    @classmethod
    def load(cls, path) -> "Config":
        with open(path) as f:
            return cls.parse(f.read())

    def serialize(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.entries.items())

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.serialize())

    def digest(self) -> str:
        """Hash of the canonical (sorted, output-independent) content."""
        canon = "\n".join(
            f"{k}={v}"
            for k, v in sorted(self.entries.items())
            if not k.startswith("output.")
        )
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    # -- typed access -----------------------------------------------------

    def has(self, key: str) -> bool:
        return key in self.entries

    def get_str(self, key: str, default: str | None = None) -> str:
        if key not in self.entries:
            if default is not None:
                return default
            raise ConfigError(f"{key}: missing required key")
        return self.entries[key]

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self.entries:
            if default is not None:
                return default
            raise ConfigError(f"{key}: missing required key")
        try:
            return float(self.entries[key])
        except ValueError:
            raise ConfigError(f"{key}: not a number: {self.entries[key]!r}") from None

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self.entries:
            if default is not None:
                return default
            raise ConfigError(f"{key}: missing required key")
        try:
            return int(self.entries[key])
        except ValueError:
            raise ConfigError(f"{key}: not an integer: {self.entries[key]!r}") from None

    def get_floats(self, key: str, default: str | None = None) -> list[float]:
        raw = self.get_str(key, default)
        try:
            return [float(tok) for tok in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"{key}: not a number list: {raw!r}") from None

    def section(self, prefix: str) -> dict[str, str]:
        dot = prefix + "."
        return {k[len(dot):]: v for k, v in self.entries.items() if k.startswith(dot)}


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_domain(cfg: Config) -> MeshSpec:
    shape = cfg.get_str("domain.shape")
    h = cfg.get_float("domain.h")
    if shape == "disk":
        return DiskSpec(
            radius=cfg.get_float("domain.radius"),
            h=h,
            gamma_a_arc=(
                cfg.get_float("domain.arc_start"),
                cfg.get_float("domain.arc_end"),
            ),
        )
    if shape == "rect":
        sides = cfg.get_str("domain.gamma_a_sides", "bottom,right,top")
        names = frozenset(s.strip() for s in sides.split(",") if s.strip())
        return RectSpec(
            width=cfg.get_float("domain.width", 1.0),
            height=cfg.get_float("domain.height", 1.0),
            h=h,
            gamma_a_sides=names,
        )
    raise ConfigError(f"domain.shape: expected 'disk' or 'rect', got {shape!r}")


def _family_params(cfg: Config, key: str) -> tuple[str, dict[str, float]]:
    family = cfg.get_str(f"{key}.family")
    if family not in FAMILIES:
        raise ConfigError(
            f"{key}.family: unknown family {family!r}, expected one of {sorted(FAMILIES)}"
        )
    params = {}
    for name in FAMILIES[family]:
        params[name] = cfg.get_float(f"{key}.{name}")
    return family, params


def build_data(cfg: Config, spec: MeshSpec) -> ProblemData:
    gfam, gpar = _family_params(cfg, "gamma")
    gamma = make_coefficient(gfam, gpar, spec, key="gamma")
    sfam, spar = _family_params(cfg, "source")
    ffam, fpar = _family_params(cfg, "flux")
    return ProblemData(
        gamma=gamma,
        source=make_field(sfam, spar, key="source"),
        flux=make_field(ffam, fpar, key="flux"),
    )


def build_shape(cfg: Config) -> Shape | None:
    kind = cfg.get_str("scene.object", "none")
    if kind == "none":
        return None
    if kind == "circle":
        return Circle(
            (cfg.get_float("scene.center_x"), cfg.get_float("scene.center_y")),
            cfg.get_float("scene.radius"),
        )
    if kind == "ellipse":
        return Ellipse(
            (cfg.get_float("scene.center_x"), cfg.get_float("scene.center_y")),
            cfg.get_float("scene.axis_a"),
            cfg.get_float("scene.axis_b"),
            cfg.get_float("scene.angle", 0.0),
        )
    if kind == "polygon":
        raw = cfg.get_str("scene.points")
        pts = []
        for pair in raw.split(";"):
            toks = pair.replace(",", " ").split()
            if len(toks) != 2:
                raise ConfigError(f"scene.points: expected 'x,y;x,y;...', got {raw!r}")
            pts.append((float(toks[0]), float(toks[1])))
        return Polygon(tuple(pts))
    raise ConfigError(
        f"scene.object: expected circle|ellipse|polygon|none, got {kind!r}"
    )


def build_scene(cfg: Config, spec: MeshSpec, data: ProblemData) -> TrueScene:
    return TrueScene(
        domain=spec,
        data=data,
        true_object=build_shape(cfg),
        h_true=cfg.get_float("scene.h_true"),
    )
