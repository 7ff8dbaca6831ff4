"""Classical Weiss energy, the radial homogeneity deficit and two-point frequency pinching."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .energy import OFF
from .errors import PointsTooFarError, ResolutionError
from .grid import LineField
from .monotonicity import _check_ball, _slabs, _sub_offsets, classical_quantities, frequency, pinching

INNER = 1.0 / 8.0
OUTER = 4.0


@dataclass(frozen=True)
class WeissReport:
    x: tuple
    r: float
    alpha: float
    W_value: float
    deficit: float | None = None
    pinching: float | None = None

    CSV_HEADER = ("x1", "x2", "x3", "r", "alpha", "W", "deficit", "pinching")

    def row(self) -> list:
        return [*self.x, self.r, self.alpha, self.W_value, self.deficit, self.pinching]


def classical_weiss(field: LineField, x, r: float, alpha: float | None = None, m: int = 2000) -> float:
    """r^(-1-2a) D - a r^(-2-2a) H with the classical ball energy and sphere height."""
    if alpha is None:
        alpha = frequency(field, x, 4.0 * field.h)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    c = classical_quantities(field, x, r, OFF, m)
    return r ** (-1.0 - 2.0 * alpha) * c.D - alpha * r ** (-2.0 - 2.0 * alpha) * c.H


def _band_weight(off, d, a, b, h):
    """Cell-averaged indicator of a <= |y - x| < b."""
    w = ((d >= a) & (d < b)).astype(float)
    near = (np.abs(d - a) <= 0.8661 * h) | (np.abs(d - b) <= 0.8661 * h)
    if np.any(near):
        sub = off[near][:, None, :] + _sub_offsets(h)[None, :, :]
        ds = np.sqrt(np.einsum("...i,...i->...", sub, sub))
        w[near] = ((ds >= a) & (ds < b)).mean(axis=1)
    return w


def weiss_deficit(field: LineField, x, r: float, inner: float = 0.25, outer: float = 2.0,
                  scaled: bool = True) -> float:
    """Integral of |(y-x).grad u - N_phi(x,|y-x|) u|^2 over B_{outer r}(x) minus B_{inner r}(x).

    The frequency inside the integrand is frozen per radial shell of width h,
    evaluated at the shell midpoint (never below the 4h resolution floor).
    With ``scaled`` the result is multiplied by r^(-1-2 N_phi(x, r)).
    """
    h = field.h
    if r < 8.0 * h * (1 - 1e-12):
        raise ResolutionError("r below resolution")
    R = outer * r
    _check_ball(field, x, R)
    a = inner * r
    k_lo = int(math.floor(a / h))
    k_hi = int(math.ceil(R / h))
    shell_n = {}
    for k in range(k_lo, k_hi + 1):
        rho = max((k + 0.5) * h, 4.0 * h)
        rho = min(rho, R)
        shell_n[k] = frequency(field, x, rho)
    total = 0.0
    for off, d, u, g in _slabs(field, x, R):
        w = _band_weight(off, d, a, R, h)
        sel = w > 0
        if not np.any(sel):
            continue
        radial = np.einsum("nk,nkj->nj", off[sel], g[sel])
        kk = np.clip(np.floor(d[sel] / h).astype(int), k_lo, k_hi)
        nvals = np.array([shell_n[k] for k in range(k_lo, k_hi + 1)])[kk - k_lo]
        res = radial - nvals[:, None] * u[sel]
        total += float(np.sum(np.einsum("nj,nj->n", res, res) * w[sel]))
    total *= h**3
    if scaled:
        total *= r ** (-1.0 - 2.0 * frequency(field, x, r))
    return total


def pinching_scales(field: LineField, x, r: float, inner: float = INNER, outer: float = OUTER) -> float:
    """W_{inner r}^{outer r}(x)."""
    return pinching(field, x, inner * r, outer * r)


def pinching_bound_eval(field: LineField, x1, x2, r: float, inner: float = INNER, outer: float = OUTER) -> dict:
    """Both sides of the two-point frequency comparison; the constant is reported as lhs/rhs."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    dist = float(np.linalg.norm(x1 - x2))
    if dist > r / 4.0 * (1 + 1e-12):
        raise PointsTooFarError("points too far")
    n1 = frequency(field, x1, r)
    n2 = n1 if dist == 0.0 else frequency(field, x2, r)
    lhs = abs(n1 - n2)
    w1 = pinching_scales(field, x1, r, inner, outer)
    w2 = w1 if dist == 0.0 else pinching_scales(field, x2, r, inner, outer)
    rhs = (math.sqrt(max(w1, 0.0)) + math.sqrt(max(w2, 0.0))) * dist / r
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return {"lhs": lhs, "rhs_unscaled": rhs, "ratio": ratio, "W1": w1, "W2": w2}


def weiss_report(field: LineField, x, r: float, alpha: float | None = None, with_deficit: bool = True,
                 with_pinching: bool = True, inner: float = INNER, outer: float = OUTER) -> WeissReport:
    if alpha is None:
        alpha = frequency(field, x, 4.0 * field.h)
    w = classical_weiss(field, x, r, alpha)
    dfc = weiss_deficit(field, x, r) if with_deficit else None
    pin = pinching_scales(field, x, r, inner, outer) if with_pinching else None
    return WeissReport(tuple(float(c) for c in x), float(r), float(alpha), w, dfc, pin)
