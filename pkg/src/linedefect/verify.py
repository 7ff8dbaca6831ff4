"""Self-contained invariant suite behind the ``verify`` command.

Every check returns a record with the measured value, its threshold and a
pass flag.  No timings are recorded, so identical configs give identical
reports.
"""
from __future__ import annotations

import math

import numpy as np

from . import cover as cov
from .cone import ConeParams, ConePoint, cone_distance, project_many
from .defects import extract_zero_set, frequency_along_defect, minkowski_content, ZeroSet
from .energy import OFF, discrete_energy, relax
from .errors import LineDefectError
from .grid import Grid, LineField, aligned_central_diffs, density_from_diffs
from .jones import DiscreteMeasure, beta2, reifenberg_hypothesis
from .monotonicity import classical_quantities, frequency, verify_identities
from .presets import constant_source, relaxed_field, sample_oracle
from .grid import sample_field


def _check(name, value, threshold, ok, **extra):
    rec = {"name": name, "value": value, "threshold": threshold, "pass": bool(ok)}
    rec.update(extra)
    return rec


def _line_residual(x: np.ndarray, s: np.ndarray, n_dirs: int = 4000) -> float:
    """min over directions of sum s |P_perp(x - bary)|^2 by a Fibonacci scan plus local refinement."""
    from .monotonicity import fibonacci_sphere

    bary = (s[:, None] * x).sum(0) / s.sum()
    d = x - bary
    tot = float(np.sum(s * np.einsum("ij,ij->i", d, d)))

    def f(v):
        v = v / np.linalg.norm(v)
        return tot - float(np.sum(s * (d @ v) ** 2))

    dirs = fibonacci_sphere(n_dirs)
    vals = tot - ((d @ dirs.T) ** 2 * s[:, None]).sum(0)
    best = dirs[int(np.argmin(vals))]
    step = 0.05
    fb = f(best)
    while step > 1e-10:
        improved = False
        for e in np.vstack([np.eye(3), -np.eye(3)]):
            cand = best + step * e
            cand /= np.linalg.norm(cand)
            fc = f(cand)
            if fc < fb:
                best, fb, improved = cand, fc, True
        if not improved:
            step *= 0.5
    return fb


def _random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def quick_checks(cfg) -> list:
    rng = np.random.default_rng(cfg.seed)
    p = ConeParams(cfg.kappa)
    out = []

    v = rng.normal(size=(200, 4))
    once = project_many(v, p)
    twice = project_many(once, p)
    out.append(_check("projection_idempotent", float(np.max(np.abs(once - twice))), 1e-12,
                      np.max(np.abs(once - twice)) <= 1e-12))

    pts = [ConePoint.from_array(a) for a in project_many(rng.normal(size=(60, 4)), p)]
    worst = 0.0
    for i in range(0, 60, 3):
        a, b, c = pts[i], pts[i + 1], pts[i + 2]
        worst = max(worst, cone_distance(a, c, p) - cone_distance(a, b, p) - cone_distance(b, c, p))
    out.append(_check("cone_triangle_inequality", worst, 1e-12, worst <= 1e-12))

    f = sample_oracle(cfg.kappa, cfg.n, cfg.amplitude, cfg.domain_lo, cfg.domain_hi)
    a = p.alpha_star
    axis = np.array([0.0, 0.0, 0.0])
    for r in cfg.radii:
        try:
            val = frequency(f, axis, r)
        except LineDefectError as err:
            out.append(_check(f"oracle_frequency_r{r!r}", None, 0.01, True, skipped=str(err)))
            continue
        out.append(_check(f"oracle_frequency_r{r!r}", val, 0.01, abs(val - a) < 0.01, expected=a))
    try:
        c = classical_quantities(f, axis, max(cfg.radii), OFF, cfg.sphere_points)
        out.append(_check("oracle_classical_frequency", c.N, 0.01, abs(c.N - a) < 0.01, expected=a))
    except LineDefectError as err:
        out.append(_check("oracle_classical_frequency", None, 0.01, True, skipped=str(err)))

    try:
        rep = verify_identities(f, (0.1, 0.05, 0.0), 0.5)
        for key in ("ibp", "dD_dr", "dH_dr", "dlogH_dr"):
            res = rep[key]["residual"]
            out.append(_check(f"identity_{key}", res, 0.02, res < 0.02))
    except LineDefectError as err:
        out.append(_check("identities", None, 0.02, True, skipped=str(err)))

    flips = rng.random(f.values.shape[:3]) < 0.5
    lo, hi = (1, 1, 1), (f.n - 1,) * 3
    d0 = density_from_diffs(aligned_central_diffs(f.values, f.h, lo, hi))
    d1 = density_from_diffs(aligned_central_diffs(f.flip_signs(flips).values, f.h, lo, hi))
    gap = float(np.max(np.abs(d0 - d1)) / max(np.max(d0), 1e-300))
    out.append(_check("gauge_invariance_density", gap, 1e-12, gap <= 1e-12))
    e0, e1 = discrete_energy(f), discrete_energy(f.flip_signs(flips))
    out.append(_check("gauge_invariance_energy", abs(e0 - e1), 1e-12 * e0, abs(e0 - e1) <= 1e-12 * e0))

    g = Grid.cube(9)
    cst = sample_field(constant_source(p), g, p, vectorized=True)
    start = cst.with_values(np.where(cst.boundary_mask[..., None], cst.values, 0.0))
    relaxed, tr = relax(start, OFF, 5000, 1e-12)
    ratio = tr.final / tr.initial
    out.append(_check("relax_constant_boundary", ratio, 1e-12, ratio <= 1e-12 and tr.is_monotone(),
                      sweeps=tr.sweeps))

    worst = 0.0
    inv = 0.0
    for _ in range(20):
        x = rng.uniform(-1, 1, size=(10, 3))
        x = x[np.linalg.norm(x, axis=1) < 1.0]
        while len(x) < 10:
            y = rng.uniform(-1, 1, size=3)
            if np.linalg.norm(y) < 1:
                x = np.vstack([x, y])
        s = rng.uniform(0.5, 2.0, size=10)
        mu = DiscreteMeasure(x, s)
        b = beta2(mu, np.zeros(3), 1.0)
        worst = max(worst, abs(b.beta2 - _line_residual(x, s)))
        Q = _random_rotation(rng)
        t = rng.normal(size=3)
        b2 = beta2(DiscreteMeasure(x @ Q.T + t, s), t, 1.0)
        inv = max(inv, abs(b.beta2 - b2.beta2))
    out.append(_check("beta2_vs_bruteforce", worst, 1e-6, worst <= 1e-6))
    out.append(_check("beta2_rigid_invariance", inv, 1e-10, inv <= 1e-10))

    z = np.linspace(-1, 1, 401)[1:-1]
    line = DiscreteMeasure(np.column_stack([0 * z, 0 * z, z]), np.full(z.size, z[1] - z[0]))
    g1 = np.linspace(-0.7, 0.7, 20)
    X, Y = np.meshgrid(g1, g1)
    plane = DiscreteMeasure(np.column_stack([X.ravel(), Y.ravel(), 0 * X.ravel()]), np.full(X.size, 0.07))
    line_sub = DiscreteMeasure(line.x[:: max(1, len(line) // len(plane))][: len(plane)],
                               np.full(min(len(plane), len(line.x[:: max(1, len(line) // len(plane))])), 0.07))
    lv = reifenberg_hypothesis(line_sub, np.zeros(3), 1.0)
    pv = reifenberg_hypothesis(plane, np.zeros(3), 1.0)
    out.append(_check("reifenberg_line_control", lv, 1e-9, lv <= 1e-9))
    out.append(_check("reifenberg_plane_separation", pv, 3.0 * lv, pv >= 3.0 * lv and pv > 0))

    zz = np.linspace(-1, 1, 20001)[1:-1]
    seg = np.column_stack([0 * zz, 0 * zz, zz])
    tree = cov.build_cover(seg, np.zeros(3), 1.0, 2)
    packs = tree.packing_sums()[1:]
    spread = max(packs) / min(packs) - 1.0
    audits = all(cov.audit_vitali(tree, k) and cov.audit_coverage(tree, k) for k in range(len(tree.levels)))
    out.append(_check("cover_segment_packing", spread, 0.10, spread <= 0.10 and audits, packing=packs))

    zs = ZeroSet(seg[::10], np.full(len(seg[::10]), 1e-3), None, 0.002)
    _, ratio = minkowski_content(zs, np.zeros(3), 0.5, 0.05, voxel=0.0025)
    out.append(_check("minkowski_segment_ratio", ratio, 2 * math.pi, abs(ratio / (2 * math.pi) - 1) < 0.1))
    return out


def full_checks(cfg) -> list:
    out = []
    p = ConeParams(cfg.kappa)
    f, trace, _ = relaxed_field(cfg)
    out.append(_check("relax_monotone", trace.sweeps, None, trace.is_monotone(1e-12)))
    zs = extract_zero_set(f, cfg.tau)
    out.append(_check("defect_points", len(zs), None, len(zs) > 0))
    if len(zs):
        fr = frequency_along_defect(f, zs, cfg.defect_radius_h * f.h)
        frac = fr["summary"]["fraction_above_floor"]
        out.append(_check("defect_frequency_floor", frac, 0.95, frac is not None and frac >= 0.95,
                          floor=p.alpha_star - 0.02))
        r = cfg.minkowski_r
        ratios = [minkowski_content(zs, np.zeros(3), r, r / k)[1] for k in (2, 4, 8)]
        spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
        out.append(_check("minkowski_ratio_stability", spread, 2.0, spread <= 2.0, ratios=ratios))
    return out


def run_suite(cfg) -> dict:
    checks = quick_checks(cfg)
    if cfg.verify_level == "full":
        checks += full_checks(cfg)
    return {"checks": checks, "passed": all(c["pass"] for c in checks)}
