"""Boundary presets and the fields built from them."""
from __future__ import annotations

import math

import numpy as np

from .cone import ConeParams, cylindrical_oracle_many
from .energy import PotentialSpec, relax, relax_multilevel
from .grid import Grid, LineField, load_snapshot, sample_field


def constant_source(params: ConeParams, c: float = 1.0):
    p = np.array([c * math.sqrt((params.kappa - 1.0) / params.kappa), c / math.sqrt(params.kappa), 0.0, 0.0])
    return lambda X: np.broadcast_to(p, np.shape(X)[:-1] + (4,)).copy()


def cylindrical_source(params: ConeParams, c: float = 1.0):
    return lambda X: cylindrical_oracle_many(params, c, X)


def perturbed_source(params: ConeParams, c: float, amp: float, mode: int, lo: float = -1.0, hi: float = 1.0):
    """Cylindrical profile about the curve x1 = amp sin(mode pi (x3 - lo)/(hi - lo)), x2 = 0."""

    def f(X):
        X = np.asarray(X, dtype=float)
        Y = X.copy()
        Y[..., 0] = X[..., 0] - amp * np.sin(mode * math.pi * (X[..., 2] - lo) / (hi - lo))
        return cylindrical_oracle_many(params, c, Y)

    return f


def source_for(cfg):
    p = cfg.params
    if cfg.preset == "constant":
        return constant_source(p, cfg.amplitude)
    if cfg.preset == "cylindrical":
        return cylindrical_source(p, cfg.amplitude)
    if cfg.preset == "perturbed-cylindrical":
        return perturbed_source(p, cfg.amplitude, cfg.perturb_amplitude, cfg.perturb_mode, cfg.domain_lo,
                                cfg.domain_hi)
    return None


def exact_field(cfg) -> LineField:
    if cfg.preset == "from-file":
        return load_snapshot(cfg.field_path)
    return sample_field(source_for(cfg), cfg.grid, cfg.params, vectorized=True)


def boundary_start(field: LineField) -> LineField:
    """Keep the shell values and put the interior at the apex."""
    v = np.where(field.boundary_mask[..., None], field.values, 0.0)
    return field.with_values(v)


def initial_field(cfg) -> LineField:
    """Starting guess: the preset itself (``preset``, and ``auto`` for the constant preset) or apex interior."""
    f = exact_field(cfg)
    if cfg.initial == "preset" or (cfg.initial == "auto" and cfg.preset == "constant"):
        return f
    return boundary_start(f)


def relaxed_field(cfg, callback=None):
    start = initial_field(cfg)
    pot = cfg.pot
    if cfg.multilevel:
        f, trace, levels = relax_multilevel(start, pot, cfg.max_sweeps, cfg.tol)
    else:
        f, trace = relax(start, pot, cfg.max_sweeps, cfg.tol, callback)
        levels = [(f.n, trace)]
    return f, trace, levels


def field_for(cfg):
    """Field selected by ``field_source``; returns (field, trace or None)."""
    if cfg.field_source == "file":
        return load_snapshot(cfg.field_path), None
    if cfg.field_source == "relaxed":
        f, trace, _ = relaxed_field(cfg)
        return f, trace
    return exact_field(cfg), None


def sample_oracle(kappa: float, n: int, c: float = 1.0, lo: float = -1.0, hi: float = 1.0) -> LineField:
    p = ConeParams(kappa)
    return sample_field(cylindrical_source(p, c), Grid.cube(n, lo, hi), p, vectorized=True)


def relax_preset(kappa: float, n: int, preset: str = "cylindrical", amp: float = 0.1, mode: int = 2,
                 c: float = 1.0, tol: float = 1e-10, max_sweeps: int = 20000, pot: PotentialSpec | None = None):
    p = ConeParams(kappa)
    g = Grid.cube(n)
    if preset == "perturbed-cylindrical":
        src = perturbed_source(p, c, amp, mode)
    elif preset == "constant":
        src = constant_source(p, c)
    else:
        src = cylindrical_source(p, c)
    start = boundary_start(sample_field(src, g, p, vectorized=True))
    return relax_multilevel(start, pot or PotentialSpec(), max_sweeps, tol)
