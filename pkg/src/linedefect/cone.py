"""Target cone D_kappa, projections onto it and its intrinsic metric.

A point of the cone is stored as a 4-vector ``(z, y1, y2, y3)`` with
``z = sqrt(kappa - 1) * |y|``.  The director ``y`` is only defined up to sign,
so ``(z, y)`` and ``(z, -y)`` denote the same point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

TOL_CONE = 1e-9


@dataclass(frozen=True)
class ConeParams:
    kappa: float

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa > 1.0):
            raise ValueError(f"kappa must be > 1, got {self.kappa!r}")

    @property
    def slope(self) -> float:
        return math.sqrt(self.kappa - 1.0)

    @property
    def link_radius(self) -> float:
        return 1.0 / math.sqrt(self.kappa)

    @property
    def alpha_star(self) -> float:
        """Vanishing order of a cylindrical defect, 1/(2 sqrt(kappa))."""
        return 0.5 / math.sqrt(self.kappa)


@dataclass(frozen=True, eq=False)
class ConePoint:
    z: float
    y: tuple = field(default=(0.0, 0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "z", float(self.z))
        object.__setattr__(self, "y", tuple(float(c) for c in self.y))
        if len(self.y) != 3:
            raise ValueError("director component must have 3 entries")

    @classmethod
    def from_array(cls, v) -> "ConePoint":
        v = np.asarray(v, dtype=float)
        return cls(v[0], tuple(v[1:4]))

    def as_array(self) -> np.ndarray:
        return np.array((self.z, *self.y))

    def norm(self) -> float:
        return math.sqrt(self.z * self.z + sum(c * c for c in self.y))

    def flipped(self) -> "ConePoint":
        return ConePoint(self.z, tuple(-c for c in self.y))

    def on_cone(self, params: ConeParams, tol: float = TOL_CONE) -> bool:
        y2 = sum(c * c for c in self.y)
        return abs(self.z**2 - (params.kappa - 1.0) * y2) <= tol * (self.z**2 + y2) and self.z >= 0

    def isclose(self, other: "ConePoint", atol: float = 1e-12) -> bool:
        """Equality of sign classes up to ``atol`` (scaled by the point norms)."""
        scale = atol * max(1.0, self.norm(), other.norm())
        a, b = self.as_array(), other.as_array()
        if abs(a[0] - b[0]) > scale:
            return False
        return bool(min(np.max(np.abs(a[1:] - b[1:])), np.max(np.abs(a[1:] + b[1:]))) <= scale)

    def __eq__(self, other):
        if not isinstance(other, ConePoint):
            return NotImplemented
        return self.isclose(other)

    __hash__ = None


APEX = ConePoint(0.0, (0.0, 0.0, 0.0))


def project_many(v: np.ndarray, params: ConeParams) -> np.ndarray:
    """Nearest point of the cone for every 4-vector in ``v`` (shape (..., 4))."""
    v = np.asarray(v, dtype=float)
    zeta = v[..., 0]
    w = v[..., 1:]
    wn = np.sqrt(np.einsum("...i,...i->...", w, w))
    s = params.slope
    rho = np.maximum(0.0, (s * zeta + wn) / params.kappa)
    out = np.empty(v.shape, dtype=float)
    out[..., 0] = s * rho
    safe = wn > 0
    scale = np.divide(rho, wn, out=np.zeros_like(rho), where=safe)
    out[..., 1:] = w * scale[..., None]
    # w = 0: deterministic director e1 (apex when zeta <= 0 since rho = 0)
    degenerate = ~safe
    if np.any(degenerate):
        out[..., 1][degenerate] = rho[degenerate]
    return out


def project_to_cone(v, params: ConeParams) -> ConePoint:
    return ConePoint.from_array(project_many(np.asarray(v, dtype=float).reshape(4), params))


def _director_angle(ya: np.ndarray, yb: np.ndarray) -> float:
    # angle between lines, in [0, pi/2]; atan2 form stays accurate near 0
    cross = np.linalg.norm(np.cross(ya, yb))
    dot = abs(float(np.dot(ya, yb)))
    return math.atan2(cross, dot)


def cone_distance(a: ConePoint, b: ConePoint, params: ConeParams) -> float:
    """Intrinsic distance on the cone over the projective link of radius 1/sqrt(kappa)."""
    t1, t2 = a.norm(), b.norm()
    ya, yb = np.array(a.y), np.array(b.y)
    if t1 == 0.0 or t2 == 0.0 or not np.any(ya) or not np.any(yb):
        return abs(t1 - t2)
    link_arc = params.link_radius * _director_angle(ya, yb)
    theta = min(link_arc, math.pi)
    # (t1 - t2)^2 + 4 t1 t2 sin^2(theta/2) == t1^2 + t2^2 - 2 t1 t2 cos(theta)
    return math.sqrt((t1 - t2) ** 2 + 4.0 * t1 * t2 * math.sin(0.5 * theta) ** 2)


def cylindrical_oracle_many(params: ConeParams, c: float, x: np.ndarray) -> np.ndarray:
    """Exact cylindrical defect along the x3-axis, evaluated at points ``x`` (shape (..., 3))."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    theta = np.arctan2(x[..., 1], x[..., 0])
    mag = c * r ** params.alpha_star
    k = params.kappa
    out = np.empty(x.shape[:-1] + (4,))
    out[..., 0] = mag * math.sqrt((k - 1.0) / k)
    out[..., 1] = mag * np.cos(0.5 * theta) / math.sqrt(k)
    out[..., 2] = mag * np.sin(0.5 * theta) / math.sqrt(k)
    out[..., 3] = 0.0
    return out


def cylindrical_oracle(params: ConeParams, c: float, x) -> ConePoint:
    return ConePoint.from_array(cylindrical_oracle_many(params, c, np.asarray(x, dtype=float).reshape(3)))


def oracle_energy_density(params: ConeParams, c: float, r):
    """|grad u|^2 of the cylindrical oracle at cylinder radius ``r``."""
    return c * c * np.asarray(r, dtype=float) ** (2.0 * params.alpha_star - 2.0) / (2.0 * params.kappa)
