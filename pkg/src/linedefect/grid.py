"""Uniform grids of cone-valued nodes, gauge alignment and field snapshots."""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import os
import struct

import numpy as np

from .cone import ConeParams, ConePoint, project_many
from .errors import StencilError

MAGIC = b"LFD1"
_HEADER = struct.Struct("<4sdqdddd")
SAMPLE_SLAB = 1 << 20  # nodes per vectorized source call


@dataclass(frozen=True)
class Grid:
    n: int
    h: float
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"grid needs n >= 8 nodes per axis, got {self.n}")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))

    @classmethod
    def cube(cls, n: int = 65, lo: float = -1.0, hi: float = 1.0) -> "Grid":
        return cls(n, (hi - lo) / (n - 1), (lo, lo, lo))

    @property
    def extent(self) -> float:
        return (self.n - 1) * self.h

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.extent

    def axis(self) -> np.ndarray:
        """Node coordinates along one axis, relative to the origin."""
        return self.h * np.arange(self.n)

    def coords(self, idx) -> np.ndarray:
        return self.lo + self.h * np.asarray(idx, dtype=float)

    def points(self, lo=(0, 0, 0), hi=None) -> np.ndarray:
        """Coordinates of the nodes in the index box [lo, hi), shape (a, b, c, 3)."""
        hi = (self.n,) * 3 if hi is None else hi
        ax = [self.origin[k] + self.h * np.arange(lo[k], hi[k]) for k in range(3)]
        return np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)

    def to_index(self, x) -> np.ndarray:
        """Continuous index coordinates of a physical point."""
        return (np.asarray(x, dtype=float) - self.lo) / self.h

    def shell_mask(self) -> np.ndarray:
        m = np.zeros((self.n,) * 3, dtype=bool)
        m[0, :, :] = m[-1, :, :] = True
        m[:, 0, :] = m[:, -1, :] = True
        m[:, :, 0] = m[:, :, -1] = True
        return m


@dataclass(frozen=True, eq=False)
class LineField:
    grid: Grid
    values: np.ndarray
    params: ConeParams
    boundary_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        v = self.values
        # read-only float64 C arrays are shared as is; anything else is copied
        if not (isinstance(v, np.ndarray) and v.dtype == np.float64 and v.flags.c_contiguous
                and not v.flags.writeable):
            v = np.array(v, dtype=np.float64, order="C")
        if v.shape != (self.grid.n,) * 3 + (4,):
            raise ValueError(f"values must have shape {(self.grid.n,) * 3 + (4,)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        mask = self.grid.shell_mask() if self.boundary_mask is None else np.array(self.boundary_mask, dtype=bool)
        mask.flags.writeable = False
        object.__setattr__(self, "boundary_mask", mask)

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def n(self) -> int:
        return self.grid.n

    def norms(self) -> np.ndarray:
        return np.sqrt(np.einsum("...i,...i->...", self.values, self.values))

    def at(self, idx) -> ConePoint:
        return ConePoint.from_array(self.values[tuple(idx)])

    def with_values(self, values) -> "LineField":
        return LineField(self.grid, values, self.params, self.boundary_mask)

    def flip_signs(self, mask) -> "LineField":
        """Same field with the stored director representative negated where ``mask`` holds."""
        v = self.values.copy()
        v[..., 1:][np.asarray(mask, dtype=bool)] *= -1.0
        return self.with_values(v)

    def scaled(self, lam: float) -> "LineField":
        return self.with_values(self.values * float(lam))

    def cone_residual(self) -> float:
        v = self.values
        y2 = np.einsum("...i,...i->...", v[..., 1:], v[..., 1:])
        return float(np.max(np.abs(v[..., 0] ** 2 - (self.params.kappa - 1.0) * y2)))


def sample_field(source, grid: Grid, params: ConeParams, vectorized: bool = False) -> LineField:
    """Evaluate ``source`` at every node.

    With ``vectorized`` the source receives an array of points (..., 3) and
    returns 4-vectors (..., 4); otherwise it maps one point to a ConePoint.
    """
    if vectorized:
        n = grid.n
        vals = np.empty((n, n, n, 4))
        step = max(1, SAMPLE_SLAB // (n * n))
        for i0 in range(0, n, step):
            i1 = min(n, i0 + step)
            vals[i0:i1] = source(grid.points((i0, 0, 0), (i1, n, n)))
        vals.flags.writeable = False
    else:
        pts = grid.points()
        flat = pts.reshape(-1, 3)
        vals = np.empty((flat.shape[0], 4))
        for i, p in enumerate(flat):
            q = source(p)
            vals[i] = q.as_array() if isinstance(q, ConePoint) else np.asarray(q, dtype=float)
        vals = vals.reshape(pts.shape[:-1] + (4,))
    return LineField(grid, vals, params)


def constant_field(grid: Grid, params: ConeParams, point) -> LineField:
    p = point.as_array() if isinstance(point, ConePoint) else np.asarray(point, dtype=float)
    return LineField(grid, np.broadcast_to(p, (grid.n,) * 3 + (4,)), params)


def align_to(center: np.ndarray, nb: np.ndarray) -> np.ndarray:
    """Flip neighbor directors whose 4-vector difference with ``center`` shrinks by it.

    |c - nb|^2 - |c - s(nb)|^2 = -4 y_c.y_nb, so the flip helps iff the director
    dot product is negative; ties keep the stored representative.
    """
    dot = np.einsum("...i,...i->...", center[..., 1:], nb[..., 1:])
    out = np.array(nb, dtype=float, copy=True)
    out[..., 1:][dot < 0] *= -1.0
    return out


def sign_min_sq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """min(|a - b|^2, |a - s(b)|^2) over the director sign s."""
    dz = a[..., 0] - b[..., 0]
    ya, yb = a[..., 1:], b[..., 1:]
    s = np.where(np.einsum("...i,...i->...", ya, yb) >= 0.0, 1.0, -1.0)
    d = ya - s[..., None] * yb
    return dz * dz + np.einsum("...i,...i->...", d, d)


def aligned_central_diffs(values: np.ndarray, h: float, lo, hi) -> np.ndarray:
    """Gauge-aligned central differences for the nodes in index box [lo, hi).

    Returns shape (a, b, c, 3, 4): axis k holds (u_{+k} - u_{-k}) / (2h) after
    aligning both neighbors with the center representative.
    """
    lo = tuple(int(v) for v in lo)
    hi = tuple(int(v) for v in hi)
    n = values.shape[:3]
    if any(l < 1 for l in lo) or any(hh > nn - 1 for hh, nn in zip(hi, n)):
        raise StencilError("interior stencil required")
    core = tuple(slice(l, hh) for l, hh in zip(lo, hi))
    c = values[core]
    out = np.empty(c.shape[:3] + (3, 4))
    for ax in range(3):
        sp = list(core)
        sm = list(core)
        sp[ax] = slice(lo[ax] + 1, hi[ax] + 1)
        sm[ax] = slice(lo[ax] - 1, hi[ax] - 1)
        up = align_to(c, values[tuple(sp)])
        um = align_to(c, values[tuple(sm)])
        out[..., ax, :] = (up - um) / (2.0 * h)
    return out


def density_from_diffs(diffs: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ij->...", diffs, diffs)


def gauge_aligned_gradient(field: LineField, node) -> tuple[float, np.ndarray]:
    """Energy density and aligned central differences (3 x 4) at one interior node."""
    i, j, k = (int(v) for v in node)
    n = field.n
    if not all(1 <= v <= n - 2 for v in (i, j, k)):
        raise StencilError("interior stencil required")
    d = aligned_central_diffs(field.values, field.h, (i, j, k), (i + 1, j + 1, k + 1))[0, 0, 0]
    return float(np.sum(d * d)), d


def save_snapshot(field: LineField, path, meta: dict | None = None) -> None:
    """Write the binary snapshot plus a JSON sidecar ``<path>.json``; both atomically."""
    g = field.grid
    head = _HEADER.pack(MAGIC, field.params.kappa, g.n, g.h, *g.origin)
    body = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    _atomic_write(path, head + body)
    record = {"format": "LFD1", "kappa": field.params.kappa, "n": g.n, "h": g.h, "origin": list(g.origin)}
    if meta:
        record.update(meta)
    _atomic_write(str(path) + ".json", (json.dumps(record, sort_keys=True, indent=1) + "\n").encode())


def load_snapshot(path) -> LineField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a field snapshot (bad magic)")
    _, kappa, n, h, ox, oy, oz = _HEADER.unpack_from(raw)
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if vals.size != n**3 * 4:
        raise ValueError(f"{path}: truncated snapshot")
    grid = Grid(n, h, (ox, oy, oz))
    return LineField(grid, vals.reshape((n, n, n, 4)), ConeParams(kappa))


def _atomic_write(path, data: bytes) -> None:
    path = os.fspath(path)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def reproject(field: LineField) -> LineField:
    return field.with_values(project_many(field.values, field.params))
