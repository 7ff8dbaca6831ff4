"""Discrete one-constant energy and its projected Gauss-Seidel minimizer."""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from . import _kernels
from .cone import ConeParams, project_many
from .errors import DivergenceError
from .grid import Grid, LineField, align_to, sign_min_sq

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PotentialSpec:
    """Double well psi(s) = a (s^2 - s_star^2)^2 in the order parameter s = |u| / sqrt(kappa)."""

    enabled: bool = False
    a: float = 0.0
    s_star: float = 0.5
    M: float | None = None
    Lambda: float | None = None

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("potential coefficient a must be >= 0")
        if not 0.0 < self.s_star < 1.0:
            raise ValueError("s_star must lie in (0, 1)")
        if self.Lambda is not None and self.Lambda < 0:
            raise ValueError("Lambda must be >= 0")

    @property
    def active(self) -> bool:
        return bool(self.enabled and self.a > 0)

    @property
    def bound_M(self) -> float:
        # psi'(s) s = 4a s^2 (s^2 - s*^2) <= 4a (1 - s*^2) s^2 on [0, 1]
        if self.M is not None:
            return float(self.M)
        return 4.0 * self.a * (1.0 - self.s_star**2) if self.enabled else 0.0

    def lam(self, params: ConeParams) -> float:
        if self.Lambda is not None:
            return float(self.Lambda)
        return self.bound_M * math.sqrt(params.kappa) if self.enabled else 0.0

    def psi(self, s):
        s = np.asarray(s, dtype=float)
        return self.a * (s * s - self.s_star**2) ** 2

    def dpsi(self, s):
        s = np.asarray(s, dtype=float)
        return 4.0 * self.a * s * (s * s - self.s_star**2)


OFF = PotentialSpec()


@dataclass
class EnergyTrace:
    energies: list = field(default_factory=list)
    initial: float = float("nan")
    residual: float = float("nan")
    sweeps: int = 0
    converged: bool = False

    @property
    def final(self) -> float:
        return self.energies[-1] if self.energies else self.initial

    def rows(self) -> list:
        return [[0, self.initial]] + [[i + 1, e] for i, e in enumerate(self.energies)]

    CSV_HEADER = ("sweep", "energy")

    def is_monotone(self, rel: float = 1e-12) -> bool:
        seq = [self.initial] + list(self.energies)
        return all(b <= a + rel * abs(a) for a, b in zip(seq, seq[1:]))


def discrete_energy(field: LineField, pot: PotentialSpec = OFF) -> float:
    """Edge sum of sign-minimized squared differences (times h) plus the potential (times h^3)."""
    return _energy_values(field.values, field.h, field.params, pot)


def _energy_values(v, h, params, pot) -> float:
    e = float(_kernels.edge_energy(v)) * h
    if pot.active:
        s = np.sqrt(np.einsum("...i,...i->...", v, v)) / math.sqrt(params.kappa)
        e += float(np.sum(pot.psi(s))) * h**3
    return e


def discrete_energy_reference(field: LineField, pot: PotentialSpec = OFF) -> float:
    """Vectorized evaluation of the same edge sum; slower, kept as an independent check."""
    v = field.values
    h = field.h
    total = 0.0
    for ax in range(3):
        a = np.take(v, np.arange(v.shape[ax] - 1), axis=ax)
        b = np.take(v, np.arange(1, v.shape[ax]), axis=ax)
        total += float(np.sum(sign_min_sq(a, b)))
    e = total * h
    if pot.active:
        s = field.norms() / math.sqrt(field.params.kappa)
        e += float(np.sum(pot.psi(s))) * h**3
    return e


def _sweep(v: np.ndarray, free: np.ndarray, params: ConeParams, h: float, pot: PotentialSpec) -> float:
    moved = 0.0
    for color in (0, 1):
        moved = max(moved, _kernels.gs_color(v, free, color, h, params.kappa, float(pot.a), float(pot.s_star),
                                             pot.active))
    return moved


def euler_lagrange_residual(field: LineField, pot: PotentialSpec = OFF) -> float:
    """Largest node displacement of one further sweep, divided by h^2."""
    v = np.array(field.values)
    moved = _sweep(v, ~field.boundary_mask, field.params, field.h, pot)
    return moved / field.h**2


def relax(field: LineField, pot: PotentialSpec = OFF, max_sweeps: int = 2000, tol: float = 1e-10,
          callback=None, xtol: float | None = None) -> tuple[LineField, EnergyTrace]:
    """Red-black projected Gauss-Seidel sweeps until the relative energy drop falls below ``tol``.

    The energy stalls at rounding level well before the nodes do; ``xtol``
    additionally requires the largest node update of the sweep to fall below it.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    v = np.array(field.values)
    free = np.ascontiguousarray(~field.boundary_mask)
    trace = EnergyTrace(initial=discrete_energy(field, pot))
    prev = trace.initial
    if prev == 0.0:
        trace.converged = True
    for sweep in range(1, max_sweeps + 1 if prev > 0.0 else 1):
        moved = _sweep(v, free, field.params, field.h, pot)
        if not np.all(np.isfinite(v)):
            raise DivergenceError("divergence")
        e = _energy_values(v, field.h, field.params, pot)
        trace.energies.append(e)
        trace.sweeps = sweep
        if callback is not None:
            callback(sweep, e)
        if e == 0.0 or ((prev - e) <= tol * prev and (xtol is None or moved <= xtol)):
            trace.converged = True
            break
        prev = e
    cur = field.with_values(v)
    trace.residual = euler_lagrange_residual(cur, pot)
    log.debug("relax n=%d sweeps=%d energy=%.12g", field.n, trace.sweeps, trace.final)
    return cur, trace


def restrict_injection(field: LineField) -> LineField:
    """Every other node; requires an odd node count."""
    n = field.n
    if (n - 1) % 2:
        raise ValueError("injection needs n - 1 even")
    g = Grid((n - 1) // 2 + 1, 2.0 * field.h, field.grid.origin)
    return LineField(g, field.values[::2, ::2, ::2], field.params)


def prolong(coarse: LineField, fine_grid: Grid) -> np.ndarray:
    """Aligned multilinear interpolation of a coarse field onto the doubled grid, projected to the cone."""
    c = coarse.values
    nc = coarse.n
    nf = fine_grid.n
    if nf != 2 * nc - 1:
        raise ValueError("fine grid must have 2 n - 1 nodes")
    out = np.zeros((nf, nf, nf, 4))
    out[::2, ::2, ::2] = c
    # fill along each axis in turn; aligned averaging of the two bracketing nodes
    for ax in range(3):
        sl_lo = [slice(None)] * 3
        sl_hi = [slice(None)] * 3
        sl_mid = [slice(None)] * 3
        for k in range(3):
            step = slice(None, None, 2) if k > ax else slice(None)
            sl_lo[k] = sl_hi[k] = sl_mid[k] = step
        sl_lo[ax] = slice(0, nf - 1, 2)
        sl_hi[ax] = slice(2, nf, 2)
        sl_mid[ax] = slice(1, nf - 1, 2)
        a = out[tuple(sl_lo)]
        b = align_to(a, out[tuple(sl_hi)])
        out[tuple(sl_mid)] = 0.5 * (a + b)
    return project_many(out, coarse.params)


def relax_multilevel(field: LineField, pot: PotentialSpec = OFF, max_sweeps: int = 2000, tol: float = 1e-10,
                     coarsest: int = 9) -> tuple[LineField, EnergyTrace, list]:
    """Coarse-to-fine relaxation: the boundary is injected downwards, each solution seeds the next grid.

    Only the finest trace is returned as the main trace; per-level traces follow as a list.
    """
    chain = [field]
    while (chain[-1].n - 1) % 2 == 0 and (chain[-1].n - 1) // 2 + 1 >= coarsest:
        chain.append(restrict_injection(chain[-1]))
    levels = []
    cur = chain[-1]
    for depth in range(len(chain) - 1, -1, -1):
        target = chain[depth]
        if depth < len(chain) - 1:
            guess = prolong(cur, target.grid)
            vals = np.where(target.boundary_mask[..., None], target.values, guess)
            target = target.with_values(vals)
        cur, tr = relax(target, pot, max_sweeps, tol)
        levels.append((target.n, tr))
    return cur, levels[-1][1], levels
