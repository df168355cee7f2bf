"""Closed catalog of analytic field families for configs.

Configurations never carry expressions, only a family name plus numeric
parameters, so runs stay portable:

    constant       value
    linear         c0, gx, gy           -> c0 + gx*x + gy*y
    gaussian_bump  base, amplitude,     -> base + amplitude *
                   center_x, center_y,     exp(-((x-cx)^2+(y-cy)^2)/(2 sigma^2))
                   sigma
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .fem import CoefficientField, FieldFn
from .mesh import DiskSpec, MeshSpec, RectSpec

FAMILIES = {
    "constant": ("value",),
    "linear": ("c0", "gx", "gy"),
    "gaussian_bump": ("base", "amplitude", "center_x", "center_y", "sigma"),
}


def make_field(family: str, params: dict[str, float], key: str = "field") -> FieldFn:
    """Build the vectorized callable for a catalog family.

    The key names the config section in error messages.
    """
    if family not in FAMILIES:
        raise ConfigError(
            f"{key}.family: unknown family {family!r}, expected one of {sorted(FAMILIES)}"
        )
    missing = [p for p in FAMILIES[family] if p not in params]
    if missing:
        raise ConfigError(f"{key}: missing parameters {missing} for family {family!r}")

    if family == "constant":
        value = float(params["value"])

        def fn(x, y):
            return np.full(np.shape(np.asarray(x)), value, dtype=float)

        return fn

    if family == "linear":
        c0, gx, gy = (float(params[p]) for p in ("c0", "gx", "gy"))

        def fn(x, y):
            return c0 + gx * np.asarray(x, dtype=float) + gy * np.asarray(y, dtype=float)

        return fn

    base, amp, cx, cy, sigma = (
        float(params[p]) for p in ("base", "amplitude", "center_x", "center_y", "sigma")
    )
    if sigma <= 0:
        raise ConfigError(f"{key}.sigma: must be positive, got {sigma}")

    def fn(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return base + amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * sigma**2))

    return fn


def _bbox(spec: MeshSpec) -> tuple[float, float, float, float]:
    if isinstance(spec, DiskSpec):
        r = spec.radius
        return -r, r, -r, r
    if isinstance(spec, RectSpec):
        return 0.0, spec.width, 0.0, spec.height
    raise ConfigError(f"unknown domain spec type {type(spec).__name__}")


def field_bounds(
    family: str, params: dict[str, float], spec: MeshSpec
) -> tuple[float, float]:
    """Conservative value bounds of the family over the domain bounding box."""
    x0, x1, y0, y1 = _bbox(spec)
    if family == "constant":
        v = float(params["value"])
        return v, v
    if family == "linear":
        corners = [
            float(params["c0"]) + float(params["gx"]) * x + float(params["gy"]) * y
            for x in (x0, x1)
            for y in (y0, y1)
        ]
        return min(corners), max(corners)
    if family == "gaussian_bump":
        base = float(params["base"])
        amp = float(params["amplitude"])
        return base + min(0.0, amp), base + max(0.0, amp)
    raise ConfigError(f"unknown family {family!r}")


def make_coefficient(
    family: str, params: dict[str, float], spec: MeshSpec, key: str = "gamma"
) -> CoefficientField:
    """Coefficient field with bounds derived over the domain; must be positive."""
    fn = make_field(family, params, key)
    lo, hi = field_bounds(family, params, spec)
    if lo <= 0:
        raise ConfigError(
            f"{key}: coefficient must be positive on the domain, derived lower bound {lo}"
        )
    return CoefficientField(fn, lo, hi)
