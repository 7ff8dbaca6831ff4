"""Smoothed and classical Dirichlet / height / frequency quantities and their identities.

Volume integrals are node sums times h^3.  The integrand densities live on
nodes (gauge-aligned central differences); the radial weights are averaged
over each node's cell wherever that cell straddles a kink or jump of the
weight, which removes the O(h) jitter of plain midpoint sampling in r.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict
import math

import numpy as np

from .energy import OFF, PotentialSpec
from .errors import BallNotInteriorError, DegenerateHeightError, ResolutionError
from .grid import LineField, aligned_central_diffs

SUPERSAMPLE = 4
SLAB_NODES = 1_500_000


class CutoffProfile:
    """phi = 1 on [0, 1/2], 2 - 2t on [1/2, 1], 0 beyond."""

    @staticmethod
    def phi(t):
        return np.clip(2.0 - 2.0 * np.asarray(t, dtype=float), 0.0, 1.0)

    @staticmethod
    def dphi(t):
        t = np.asarray(t, dtype=float)
        return np.where((t > 0.5) & (t < 1.0), -2.0, 0.0)


PHI = CutoffProfile()


@dataclass(frozen=True)
class FrequencyRecord:
    x: tuple
    r: float
    D_phi: float
    H_phi: float
    E_phi: float
    N_phi: float

    def row(self) -> list:
        return [*self.x, self.r, self.D_phi, self.H_phi, self.E_phi, self.N_phi]

    CSV_HEADER = ("x1", "x2", "x3", "r", "D_phi", "H_phi", "E_phi", "N_phi")


@dataclass(frozen=True)
class ClassicalRecord:
    x: tuple
    r: float
    D: float
    H: float
    N: float
    D_tilde: float
    N_tilde: float


def _sub_offsets(h: float, s: int = SUPERSAMPLE) -> np.ndarray:
    o = ((np.arange(s) + 0.5) / s - 0.5) * h
    return np.stack(np.meshgrid(o, o, o, indexing="ij"), axis=-1).reshape(-1, 3)


def _weights(off: np.ndarray, d: np.ndarray, r: float, h: float) -> dict:
    """Cell-averaged weights phi(d/r), A = 1[r/2 < d < r], A/d, A*d and the ball indicator."""

    def node_w(dd):
        ann = ((dd > 0.5 * r) & (dd < r)).astype(float)
        safe = np.where(dd > 0, dd, 1.0)
        return {
            "phi": PHI.phi(dd / r),
            "ann": ann,
            "ann_over_d": ann / safe,
            "ann_times_d": ann * dd,
            "ball": (dd < r).astype(float),
        }

    w = node_w(d)
    near = (np.abs(d - 0.5 * r) <= 0.8661 * h) | (np.abs(d - r) <= 0.8661 * h)
    if np.any(near):
        sub = off[near][:, None, :] + _sub_offsets(h)[None, :, :]
        ds = np.sqrt(np.einsum("...i,...i->...", sub, sub))
        ws = node_w(ds)
        for k in w:
            w[k][near] = ws[k].mean(axis=1)
    return w


def _check_ball(field: LineField, x, R: float, r_min: float | None = None):
    h = field.h
    if r_min is not None and r_min < 4.0 * h * (1 - 1e-12):
        raise ResolutionError("r below resolution")
    xi = field.grid.to_index(x)
    rad = R / h + 1.0
    lo = np.floor(xi - rad).astype(int)
    hi = np.ceil(xi + rad).astype(int) + 1
    if np.any(lo < 1) or np.any(hi > field.n - 1):
        raise BallNotInteriorError("ball not interior")
    return xi, lo, hi


def _slabs(field: LineField, x, R: float):
    """Yield per-slab node data for the box around B_{R+h}(x)."""
    h = field.h
    xi, lo, hi = _check_ball(field, x, R)
    plane = int((hi[1] - lo[1]) * (hi[2] - lo[2]))
    step = max(1, SLAB_NODES // max(plane, 1))
    ax1 = (np.arange(lo[1], hi[1]) - xi[1]) * h
    ax2 = (np.arange(lo[2], hi[2]) - xi[2]) * h
    for a0 in range(lo[0], hi[0], step):
        a1 = min(hi[0], a0 + step)
        ax0 = (np.arange(a0, a1) - xi[0]) * h
        off = np.stack(np.meshgrid(ax0, ax1, ax2, indexing="ij"), axis=-1)
        d = np.sqrt(np.einsum("...i,...i->...", off, off))
        keep = d < R + h
        if not np.any(keep):
            continue
        blo, bhi = (a0, lo[1], lo[2]), (a1, hi[1], hi[2])
        g = aligned_central_diffs(field.values, h, blo, bhi)[keep]
        u = field.values[a0:a1, lo[1]:hi[1], lo[2]:hi[2]][keep]
        yield off[keep], d[keep], u, g


def ball_integrals(field: LineField, x, r: float, v=None, pot: PotentialSpec | None = None,
                   classical: bool = False) -> dict:
    """All volume integrals on B_r(x) needed by the smoothed and classical quantities."""
    h = field.h
    acc: dict = {}

    def add(k, val):
        acc[k] = acc.get(k, 0.0) + float(val)

    vv = None if v is None else np.asarray(v, dtype=float)
    for off, d, u, g in _slabs(field, x, r):
        w = _weights(off, d, r, h)
        grad2 = np.einsum("nij,nij->n", g, g)
        nu = off / np.where(d > 0, d, 1.0)[:, None]
        dnu = np.einsum("nk,nkj->nj", nu, g)
        u2 = np.einsum("nj,nj->n", u, u)
        u_dnu = np.einsum("nj,nj->n", u, dnu)
        add("D", np.sum(grad2 * w["phi"]))
        add("H", 2.0 * np.sum(u2 * w["ann_over_d"]))
        add("E", 2.0 * np.sum(np.einsum("nj,nj->n", dnu, dnu) * w["ann_times_d"]))
        add("ibp", np.sum(u_dnu * w["ann"]))
        if vv is not None:
            dv = np.einsum("k,nkj->nj", vv, g)
            add("dvD", np.sum(np.einsum("nj,nj->n", dnu, dv) * w["ann"]))
            add("dvH", np.sum(np.einsum("nj,nj->n", dv, u) * w["ann_over_d"]))
        if classical:
            add("D_ball", np.sum(grad2 * w["ball"]))
            if pot is not None and pot.active:
                s = np.sqrt(u2) / math.sqrt(field.params.kappa)
                add("D_pot", np.sum(pot.dpsi(s) * s * w["ball"]))
    vol = h**3
    return {k: val * vol for k, val in acc.items()}


def smoothed_quantities(field: LineField, x, r: float) -> FrequencyRecord:
    _check_ball(field, x, r, r_min=r)
    q = ball_integrals(field, x, r)
    if not q["H"] > 0:
        raise DegenerateHeightError("degenerate height")
    return FrequencyRecord(tuple(float(c) for c in x), float(r), q["D"], q["H"], q["E"], r * q["D"] / q["H"])


def frequency(field: LineField, x, r: float) -> float:
    return smoothed_quantities(field, x, r).N_phi


def fibonacci_sphere(m: int) -> np.ndarray:
    k = np.arange(m) + 0.5
    z = 1.0 - 2.0 * k / m
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    th = math.pi * (3.0 - math.sqrt(5.0)) * k
    return np.stack([rho * np.cos(th), rho * np.sin(th), z], axis=-1)


def trilinear(field_scalar: np.ndarray, grid, pts: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of a node scalar at physical points."""
    q = (np.asarray(pts, dtype=float) - grid.lo) / grid.h
    i0 = np.clip(np.floor(q).astype(int), 0, grid.n - 2)
    t = q - i0
    out = np.zeros(q.shape[:-1])
    for c in range(8):
        b = ((c >> 2) & 1, (c >> 1) & 1, c & 1)
        w = np.ones(q.shape[:-1])
        for k in range(3):
            w = w * (t[..., k] if b[k] else 1.0 - t[..., k])
        out += w * field_scalar[i0[..., 0] + b[0], i0[..., 1] + b[1], i0[..., 2] + b[2]]
    return out


def sphere_height(field: LineField, x, r: float, m: int = 2000) -> float:
    pts = np.asarray(x, dtype=float) + r * fibonacci_sphere(m)
    u2 = np.einsum("...i,...i->...", field.values, field.values)
    return float(4.0 * math.pi * r * r * np.mean(trilinear(u2, field.grid, pts)))


def classical_quantities(field: LineField, x, r: float, pot: PotentialSpec = OFF, m: int = 2000) -> ClassicalRecord:
    _check_ball(field, x, r, r_min=r)
    q = ball_integrals(field, x, r, pot=pot, classical=True)
    D = q["D_ball"]
    H = sphere_height(field, x, r, m)
    if not H > 0:
        raise DegenerateHeightError("degenerate height")
    N = r * D / H
    if pot.active:
        Dt = D + q.get("D_pot", 0.0)
    else:
        Dt = D
    lam = pot.lam(field.params)
    Nt = N if (lam == 0.0 and Dt is D) else math.exp(lam * r) * r * Dt / H
    return ClassicalRecord(tuple(float(c) for c in x), float(r), D, H, N, Dt, Nt)


def pinching(field: LineField, x, s: float, r: float) -> float:
    """W_s^r(x) = N_phi(x, r) - N_phi(x, s)."""
    if not 0 < s <= r:
        raise ValueError("pinching needs 0 < s <= r")
    if s == r:
        _check_ball(field, x, r, r_min=r)
        return 0.0
    return frequency(field, x, r) - frequency(field, x, s)


def _rel(lhs: float, rhs: float) -> float:
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale == 0.0 else abs(lhs - rhs) / scale


def verify_identities(field: LineField, x, r: float, v=(1.0, 0.0, 0.0), dr: float | None = None,
                      dx: float | None = None) -> dict:
    """Residuals of the radial and directional derivative identities of the smoothed quantities.

    Each entry holds the two sides and their relative residual.  The
    frequency-derivative entry reports the finite-difference slope and the
    closed-form expression; its sign is what matters.
    """
    h = field.h
    dr = h if dr is None else dr
    dx = h if dx is None else dx
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    vn = float(np.linalg.norm(v))
    _check_ball(field, x, r + dr, r_min=r - dr)
    if vn > 0:
        _check_ball(field, x + dx * v / vn, r)
        _check_ball(field, x - dx * v / vn, r)

    c = ball_integrals(field, x, r, v=v if vn > 0 else None)
    D, H, E = c["D"], c["H"], c["E"]
    if not H > 0:
        raise DegenerateHeightError("degenerate height")
    N = r * D / H
    rp = ball_integrals(field, x, r + dr)
    rm = ball_integrals(field, x, r - dr)
    dD = (rp["D"] - rm["D"]) / (2 * dr)
    dH = (rp["H"] - rm["H"]) / (2 * dr)
    Np = (r + dr) * rp["D"] / rp["H"]
    Nm = (r - dr) * rm["D"] / rm["H"]
    dN = (Np - Nm) / (2 * dr)
    dlogH = (math.log(rp["H"] / (r + dr) ** 2) - math.log(rm["H"] / (r - dr) ** 2)) / (2 * dr)

    out = {
        "ibp": (D, 2.0 / r * c["ibp"]),
        "dD_dr": (dD, D / r + 2.0 * E / r**2),
        "dH_dr": (dH, 2.0 * H / r + 2.0 * D),
        "dlogH_dr": (dlogH, 2.0 * N / r),
        "dN_dr": (dN, 2.0 * (H * E - r * r * D * D) / (r * H * H)),
    }
    if vn > 0:
        e = v / vn
        sp = ball_integrals(field, x + dx * e, r)
        sm = ball_integrals(field, x - dx * e, r)
        out["dD_dv"] = (vn * (sp["D"] - sm["D"]) / (2 * dx), 4.0 / r * c["dvD"])
        out["dH_dv"] = (vn * (sp["H"] - sm["H"]) / (2 * dx), 4.0 * c["dvH"])
    report = {k: {"lhs": a, "rhs": b, "residual": _rel(a, b)} for k, (a, b) in out.items()}
    report["dN_dr"]["residual"] = _rel(*out["dN_dr"])
    report["dN_dr"]["nonnegative"] = out["dN_dr"][0]
    return report


def monotonicity_ladder(field: LineField, x, radii) -> dict:
    """N_phi and r^-2 H_phi over increasing radii; reports the worst decrease of each."""
    recs = [smoothed_quantities(field, x, r) for r in sorted(radii)]
    n = [rc.N_phi for rc in recs]
    hh = [rc.H_phi / rc.r**2 for rc in recs]
    drop_n = min([b - a for a, b in zip(n, n[1:])], default=0.0)
    drop_h = min([(b - a) / max(abs(a), 1e-300) for a, b in zip(hh, hh[1:])], default=0.0)
    return {"records": recs, "min_dN": drop_n, "min_rel_dH": drop_h}


def local_bounds_check(field: LineField, x, y, rho: float) -> dict:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.linalg.norm(y - x) > rho:
        raise ValueError("y must lie in B_rho(x)")
    _check_ball(field, x, 16.0 * rho)
    hy = smoothed_quantities(field, y, rho)
    hx = smoothed_quantities(field, x, 4.0 * rho)
    nx = smoothed_quantities(field, x, 16.0 * rho)
    return {
        "height_ratio": hy.H_phi / hx.H_phi,
        "frequency_ratio": hy.N_phi / (nx.N_phi + 1.0),
    }


def as_dict(rec) -> dict:
    return asdict(rec)
