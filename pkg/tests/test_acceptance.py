"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line (printed in the terminal summary) and
then asserts the criterion as stated.
"""
import math
import time

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from linedefect.cli import main
from linedefect.cone import ConeParams
from linedefect.cover import audit_coverage, audit_nesting, audit_vitali, build_cover
from linedefect.defects import extract_zero_set, frequency_along_defect, minkowski_content
from linedefect.energy import OFF, relax_multilevel
from linedefect.grid import Grid, sample_field
from linedefect.jones import DiscreteMeasure, beta2, reifenberg_hypothesis
from linedefect.monotonicity import classical_quantities, frequency, monotonicity_ladder, verify_identities
from linedefect.presets import boundary_start, cylindrical_source, sample_oracle
from linedefect.weiss import classical_weiss, pinching_bound_eval, weiss_deficit

from oracles import line_infimum, oracle_values

ORIGIN = (0.0, 0.0, 0.0)


def _record(log, label, ok, detail):
    log.append((label, bool(ok), detail))


# 1 ----------------------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.parametrize("kappa", [4.0, 2.0, 9.0])
def test_criterion_01_oracle_frequency(acceptance_log, kappa):
    t = time.perf_counter()
    f = sample_oracle(kappa, 129)
    target = 1 / (2 * math.sqrt(kappa))
    smoothed = {r: frequency(f, ORIGIN, r) for r in (0.125, 0.25, 0.5)}
    classical = classical_quantities(f, ORIGIN, 0.5).N
    elapsed = time.perf_counter() - t
    errs = [abs(v - target) for v in smoothed.values()] + [abs(classical - target)]
    ok = max(errs) <= 0.01 and elapsed < 120
    detail = (f"kappa={kappa:g} target={target:.4f} N_phi=" + ",".join(f"{v:.4f}" for v in smoothed.values())
              + f" N={classical:.4f} max_err={max(errs):.4f} time={elapsed:.1f}s")
    _record(acceptance_log, f"1 oracle frequency (kappa={kappa:g})", ok, detail)
    assert max(errs) <= 0.01, detail
    assert elapsed < 120, detail


# 2 ----------------------------------------------------------------------------

def test_criterion_02_identity_suite(acceptance_log, oracle129):
    rep = verify_identities(oracle129, (0.1, 0.05, 0.0), 0.5)
    keys = ("ibp", "dD_dr", "dH_dr", "dlogH_dr")
    res = {k: rep[k]["residual"] for k in keys}
    lad = monotonicity_ladder(oracle129, (0.1, 0.05, 0.0), [0.125, 0.25, 0.5])
    ok = max(res.values()) < 0.02 and lad["min_dN"] >= -5e-3
    detail = " ".join(f"{k}={v:.2e}" for k, v in res.items()) + f" min_dN={lad['min_dN']:.2e}"
    _record(acceptance_log, "2 identity suite", ok, detail)
    assert ok, detail


# 3 ----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def oracle_wide273():
    # [-2.125, 2.125]^3 at h = 1/64: smallest cube holding B_{4r} with r/8 >= 4h at r = 0.5
    p = ConeParams(4.0)
    return sample_field(cylindrical_source(p), Grid.cube(273, -2.125, 2.125), p, vectorized=True)


@pytest.mark.slow
def test_criterion_03_weiss_pinching_vanish(acceptance_log, oracle129, oracle_wide273):
    deficit = weiss_deficit(oracle129, ORIGIN, 0.25)
    w = classical_weiss(oracle129, ORIGIN, 0.5, 0.25)
    pin = pinching_bound_eval(oracle_wide273, (0.0, 0.0, -0.0625), (0.0, 0.0, 0.0625), 0.5)
    parts = {"deficit": deficit < 1e-3, "weiss": abs(w) <= 1e-3,
             "pinch_lhs": pin["lhs"] < 1e-3, "pinch_rhs": pin["rhs_unscaled"] < 1e-3}
    ok = all(parts.values())
    detail = (f"deficit={deficit:.2e} weiss={w:.3e} lhs={pin['lhs']:.2e} rhs={pin['rhs_unscaled']:.2e} "
              f"W1={pin['W1']:.2e} failing={[k for k, v in parts.items() if not v]}")
    _record(acceptance_log, "3 Weiss/pinching vanishing", ok, detail)
    assert ok, detail


# 4 ----------------------------------------------------------------------------

def test_criterion_04_beta2_oracle(acceptance_log):
    rng = np.random.default_rng(2024)
    t = time.perf_counter()
    worst_brute = worst_rigid = 0.0
    for k in range(100):
        x = rng.normal(size=(10, 3))
        x *= (rng.random(10) ** (1 / 3) / np.linalg.norm(x, axis=1))[:, None] * 0.999
        mu = DiscreteMeasure(x, rng.random(10) + 0.1)
        b = beta2(mu, np.zeros(3), 1.0).beta2
        worst_brute = max(worst_brute, abs(b - line_infimum(mu.x, mu.s, seed=k)))
        Q = Rotation.random(random_state=k).as_matrix()
        shift = rng.normal(size=3)
        moved = DiscreteMeasure(mu.x @ Q.T + shift, mu.s)
        worst_rigid = max(worst_rigid, abs(b - beta2(moved, shift, 1.0).beta2))
    elapsed = time.perf_counter() - t
    ok = worst_brute <= 1e-6 and worst_rigid <= 1e-10 and elapsed < 30
    detail = f"brute={worst_brute:.2e} rigid={worst_rigid:.2e} time={elapsed:.1f}s"
    _record(acceptance_log, "4 beta2 oracle equivalence", ok, detail)
    assert ok, detail


# 5 ----------------------------------------------------------------------------

def _line(n, eps=0.0, weight=None):
    t = np.linspace(-1, 1, n + 2)[1:-1]
    pts = np.column_stack([t, eps * np.sin(3 * np.pi * t), np.zeros_like(t)])
    return DiscreteMeasure(pts, np.full(n, weight if weight else 2.0 / n))


def _plane(m):
    g = (np.arange(m) + 0.5) / m * 2 - 1
    X, Y = np.meshgrid(g, g)
    keep = X**2 + Y**2 < 1
    return DiscreteMeasure(np.column_stack([X[keep], Y[keep], np.zeros(keep.sum())]),
                           np.full(keep.sum(), (2.0 / m) ** 2))


def test_criterion_05_reifenberg_separation(acceptance_log):
    line_ctrl = reifenberg_hypothesis(_line(400), np.zeros(3), 1.0)
    ratios = []
    for m in (12, 20):
        plane = _plane(m)
        line = _line(len(plane), weight=plane.s[0])
        lv = reifenberg_hypothesis(line, np.zeros(3), 1.0, s_min=0.1)
        pv = reifenberg_hypothesis(plane, np.zeros(3), 1.0, s_min=0.1)
        ratios.append(pv / lv if lv > 0 else math.inf)
    eps = np.array([0.01, 0.02, 0.04])
    vals = [reifenberg_hypothesis(_line(400, e), np.zeros(3), 1.0, s_min=0.05) for e in eps]
    slope = float(np.polyfit(np.log(eps), np.log(vals), 1)[0])
    ok = line_ctrl <= 1e-9 and min(ratios) >= 3 and abs(slope - 2) <= 0.2 * 2
    detail = f"line={line_ctrl:.2e} plane/line={min(ratios):.3g} eps_exponent={slope:.3f}"
    _record(acceptance_log, "5 Reifenberg separation", ok, detail)
    assert ok, detail


# 6 ----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_06_covering_packing(acceptance_log):
    z = np.linspace(-1, 1, 100001)[1:-1]
    seg = np.column_stack([0 * z, 0 * z, z])
    tree = build_cover(seg, np.zeros(3), 1.0, 3)
    packs = tree.packing_sums()[1:]
    spread = max(packs) / min(packs) - 1
    audits = all(audit_vitali(tree, k) and audit_coverage(tree, k) and audit_nesting(tree, k)
                 for k in range(len(tree.levels)))
    g = np.arange(-1, 1, 0.0012) + 0.0006
    X, Y = np.meshgrid(g, g)
    m = X**2 + Y**2 < 1
    plane = np.column_stack([X[m], Y[m], 0 * X[m]])
    ptree = build_cover(plane, np.zeros(3), 1.0, 3)
    pp = ptree.packing_sums()
    growth = [b / a for a, b in zip(pp[1:], pp[2:])]
    ok = spread <= 0.10 and audits and min(growth) >= 3
    detail = (f"segment packing=" + ",".join(f"{p:.4f}" for p in packs) + f" spread={spread:.3f} audits={audits}"
              f" plane growth=" + ",".join(f"{g:.2f}" for g in growth))
    _record(acceptance_log, "6 covering/packing", ok, detail)
    assert ok, detail


# 7 ----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_07_minkowski_stability(acceptance_log, relaxed_pert129):
    f = relaxed_pert129[0]
    zs = extract_zero_set(f)
    r = 0.5
    ratios = [minkowski_content(zs, ORIGIN, r, rho)[1] for rho in (r / 2, r / 4, r / 8)]
    ok = len(zs) > 0 and min(ratios) > 0 and max(ratios) / min(ratios) <= 2
    detail = f"points={len(zs)} ratios=" + ",".join(f"{q:.3f}" for q in ratios)
    _record(acceptance_log, "7 Minkowski ratio stability", ok, detail)
    assert ok, detail


# 8 ----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_08_defect_frequency_floor(acceptance_log, relaxed_pert129):
    f = relaxed_pert129[0]
    zs = extract_zero_set(f)
    out = frequency_along_defect(f, zs, 8 * f.h)
    s = out["summary"]
    frac = s["fraction_above_floor"] or 0.0
    ok = s["count"] > 0 and frac >= 0.95
    detail = (f"interior={s['count']} skipped={s['skipped']} fraction={frac:.3f} "
              f"N_phi range=[{s['min']}, {s['max']}] floor={s['floor']:.3f}")
    _record(acceptance_log, "8 defect frequency floor", ok, detail)
    assert ok, detail


# 9 ----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_09_minimizer_health(acceptance_log):
    p = ConeParams(4.0)
    exact = sample_field(cylindrical_source(p), Grid.cube(65), p, vectorized=True)
    t = time.perf_counter()
    f, trace, levels = relax_multilevel(boundary_start(exact), OFF, 20000, 1e-10)
    elapsed = time.perf_counter() - t
    monotone = all(tr.is_monotone(1e-12) for _, tr in levels)
    pts = f.grid.points()
    ref = oracle_values(4.0, 1.0, pts)
    flip = ref * np.array([1, -1, -1, -1])
    err = np.minimum(np.linalg.norm(f.values - ref, axis=-1), np.linalg.norm(f.values - flip, axis=-1))
    ok = monotone and trace.converged and elapsed < 300 and err.max() <= 5 * f.h
    detail = (f"monotone={monotone} converged={trace.converged} time={elapsed:.1f}s "
              f"max_pointwise={err.max():.3e} (5h={5 * f.h:.3e})")
    _record(acceptance_log, "9 minimizer health", ok, detail)
    assert ok, detail


# 10 ---------------------------------------------------------------------------

def test_criterion_10_determinism(acceptance_log, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"n": 129}')
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        main(["verify", "--config", str(cfg), "--out", str(out), "--seed", "11"])
        outs.append((out / "verify.json").read_bytes())
    ok = outs[0] == outs[1]
    _record(acceptance_log, "10 determinism", ok, f"verify.json bytes={len(outs[0])} identical={ok}")
    assert ok
