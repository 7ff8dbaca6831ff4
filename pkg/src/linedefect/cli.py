"""Command line entry point: ``linedefect <command> [--config PATH] [--out DIR] [--seed N] [--threads N]``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import cover as cov
from .config import ConfigError, load_config, make_config
from .defects import ZeroSet, extract_zero_set, frequency_along_defect, link_curves, minkowski_content
from .errors import LineDefectError
from .grid import save_snapshot
from .io import provenance, write_csv, write_json
from .jones import DiscreteMeasure, beta2, distortion_check, reifenberg_hypothesis
from .monotonicity import FrequencyRecord, classical_quantities, smoothed_quantities
from .presets import exact_field, field_for, relaxed_field
from .weiss import WeissReport, pinching_bound_eval, weiss_report

log = logging.getLogger("linedefect")

COMMANDS = ("oracle", "relax", "analyze", "cover", "verify", "report")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _meta(cfg, field=None) -> dict:
    h = field.h if field is not None else cfg.grid.h
    n = field.n if field is not None else cfg.n
    return provenance(h, n, cfg.kappa, cfg.seed)


def _path(cfg, name: str) -> str:
    return os.path.join(cfg.out, name)


def cmd_oracle(cfg) -> int:
    f = exact_field(cfg)
    meta = _meta(cfg, f)
    meta["preset"] = cfg.preset
    save_snapshot(f, _path(cfg, "field.lfd"), meta)
    print(f"oracle: wrote {_path(cfg, 'field.lfd')} (n={f.n}, h={f.h!r})")
    return EXIT_OK


def cmd_relax(cfg) -> int:
    f, trace, levels = relaxed_field(cfg)
    meta = _meta(cfg, f)
    meta.update(preset=cfg.preset, converged=trace.converged, sweeps=trace.sweeps, residual=trace.residual)
    save_snapshot(f, _path(cfg, "relaxed.lfd"), meta)
    write_csv(_path(cfg, "energy_trace.csv"), trace.CSV_HEADER, trace.rows(), meta)
    write_csv(_path(cfg, "relax_levels.csv"), ("n", "sweeps", "initial", "final", "converged", "monotone"),
              [[n, t.sweeps, t.initial, t.final, t.converged, t.is_monotone()] for n, t in levels], meta)
    ok = trace.is_monotone()
    print(f"relax: n={f.n} sweeps={trace.sweeps} energy={trace.final!r} converged={trace.converged} monotone={ok}")
    return EXIT_OK if ok else EXIT_FAIL


def _zero_set(cfg, f) -> ZeroSet:
    zs = extract_zero_set(f, cfg.tau)
    return link_curves(zs, cfg.gap if cfg.gap is not None else 3.0 * f.h)


def cmd_analyze(cfg) -> int:
    f, _ = field_for(cfg)
    meta = _meta(cfg, f)
    rng = np.random.default_rng(cfg.seed)

    freq, classical, weiss, skipped = [], [], [], []
    for x in cfg.points:
        for r in cfg.radii:
            try:
                freq.append(smoothed_quantities(f, x, r).row())
            except LineDefectError as err:
                skipped.append([*x, r, "smoothed", str(err)])
                continue
            try:
                c = classical_quantities(f, x, r, cfg.pot, cfg.sphere_points)
                classical.append([*x, r, c.D, c.H, c.N, c.D_tilde, c.N_tilde])
            except LineDefectError as err:
                skipped.append([*x, r, "classical", str(err)])
            try:
                weiss.append(weiss_report(f, x, r, inner=cfg.pinch_inner, outer=cfg.pinch_outer).row())
            except LineDefectError as err:
                skipped.append([*x, r, "weiss", str(err)])
    write_csv(_path(cfg, "frequency.csv"), FrequencyRecord.CSV_HEADER, freq, meta)
    write_csv(_path(cfg, "classical.csv"), ("x1", "x2", "x3", "r", "D", "H", "N", "D_tilde", "N_tilde"),
              classical, meta)
    write_csv(_path(cfg, "weiss.csv"), WeissReport.CSV_HEADER, weiss, meta)
    write_csv(_path(cfg, "skipped.csv"), ("x1", "x2", "x3", "r", "quantity", "reason"), skipped, meta)

    zs = _zero_set(cfg, f)
    zmeta = dict(meta, tau=zs.meta.get("tau"), voxel=zs.meta.get("voxel"))
    write_csv(_path(cfg, "zero_set.csv"), ZeroSet.CSV_HEADER, zs.rows(), zmeta)

    summary = {"zero_points": len(zs), "polylines": len(zs.polylines or [])}
    if len(zs):
        fr = frequency_along_defect(f, zs, cfg.defect_radius_h * f.h, cfg.delta)
        write_csv(_path(cfg, "defect_frequency.csv"), ("x1", "x2", "x3", "N_phi"),
                  [[*p, v] for p, v in fr["values"]], zmeta)
        summary["defect_frequency"] = fr["summary"]

        mu = DiscreteMeasure.from_zero_set(zs)
        betas, dist = [], []
        for x in cfg.points:
            for r in cfg.radii:
                try:
                    b = beta2(mu, x, r)
                except LineDefectError:
                    continue
                betas.append([*x, r, b.mass, b.beta2, *b.eigenvalues, *b.best_line[1]])
                try:
                    d = distortion_check(f, mu, x, r, cfg.pinch_inner, cfg.pinch_outer)
                    dist.append([*x, r, d["lhs"], d["rhs_unscaled"], d["ratio"]])
                except LineDefectError as err:
                    skipped.append([*x, r, "distortion", str(err)])
        write_csv(_path(cfg, "beta.csv"),
                  ("x1", "x2", "x3", "r", "mass", "beta2", "lambda1", "lambda2", "lambda3", "v1", "v2", "v3"),
                  betas, zmeta)
        write_csv(_path(cfg, "distortion.csv"), ("x1", "x2", "x3", "r", "lhs", "rhs_unscaled", "ratio"), dist, zmeta)

        mk = {}
        r = cfg.minkowski_r
        x0 = cfg.points[0]
        for k in (2, 4, 8):
            vol, ratio = minkowski_content(zs, x0, r, r / k)
            mk[f"rho=r/{k}"] = {"volume": vol, "ratio": ratio}
        summary["minkowski"] = {"x": x0, "r": r, "levels": mk}
        try:
            summary["reifenberg"] = reifenberg_hypothesis(mu, x0, r, cfg.s_min)
        except LineDefectError as err:
            summary["reifenberg"] = None
            skipped.append([*x0, r, "reifenberg", str(err)])

        pairs = []
        rp = max(cfg.radii)
        for _ in range(cfg.n_pairs):
            i = int(rng.integers(len(zs)))
            near = np.flatnonzero(np.linalg.norm(zs.points - zs.points[i], axis=1) <= rp / 4.0)
            j = int(near[rng.integers(near.size)])
            try:
                pb = pinching_bound_eval(f, zs.points[i], zs.points[j], rp, cfg.pinch_inner, cfg.pinch_outer)
            except LineDefectError:
                continue
            pairs.append([*zs.points[i], *zs.points[j], rp, pb["lhs"], pb["rhs_unscaled"], pb["ratio"]])
        write_csv(_path(cfg, "pinching_pairs.csv"),
                  ("y1", "y2", "y3", "z1", "z2", "z3", "r", "lhs", "rhs_unscaled", "ratio"), pairs, zmeta)
        write_csv(_path(cfg, "skipped.csv"), ("x1", "x2", "x3", "r", "quantity", "reason"), skipped, meta)
    write_json(_path(cfg, "analyze.json"), summary, zmeta)
    print(f"analyze: {len(freq)} frequency records, {len(zs)} defect points, {len(skipped)} skipped")
    return EXIT_OK


def cmd_cover(cfg) -> int:
    f, _ = field_for(cfg)
    zs = _zero_set(cfg, f)
    x0 = cfg.points[0]
    tree = cov.build_cover(zs.points, x0, cfg.minkowski_r, cfg.cover_depth)
    rec = tree.to_record()
    rec["packing_sums"] = tree.packing_sums()
    rec["audits"] = {
        "vitali": [cov.audit_vitali(tree, k) for k in range(len(tree.levels))],
        "coverage": [cov.audit_coverage(tree, k) for k in range(len(tree.levels))],
        "nesting": [cov.audit_nesting(tree, k) for k in range(len(tree.levels))],
    }
    write_json(_path(cfg, "cover.json"), rec, _meta(cfg, f))
    ok = all(all(v) for v in rec["audits"].values())
    print("cover: packing " + " ".join(f"{p:.6g}" for p in rec["packing_sums"]) + f" audits={'ok' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(cfg) -> int:
    from .verify import run_suite

    res = run_suite(cfg)
    write_json(_path(cfg, "verify.json"), res, _meta(cfg))
    for c in res["checks"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']}")
    return EXIT_OK if res["passed"] else EXIT_FAIL


def cmd_report(cfg) -> int:
    from .report import build_report

    written = build_report(cfg.out, _meta(cfg))
    print("report: " + (", ".join(written) if written else "no input tables found"))
    return EXIT_OK


HANDLERS = {"oracle": cmd_oracle, "relax": cmd_relax, "analyze": cmd_analyze, "cover": cmd_cover,
            "verify": cmd_verify, "report": cmd_report}


def run(command: str, cfg) -> int:
    if command not in HANDLERS:
        raise ValueError(f"unknown command {command!r}")
    if cfg.threads > 1:
        import numba

        numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))
    return HANDLERS[command](cfg)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="linedefect", description="Line-field defect experiments on a cubic grid.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat JSON config file")
    ap.add_argument("--out", help="output directory (overrides config)")
    ap.add_argument("--seed", type=int, help="random seed (overrides config)")
    ap.add_argument("--threads", type=int, help="worker threads (overrides config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    over = {"out": args.out, "seed": args.seed, "threads": args.threads}
    try:
        cfg = load_config(args.config, **over) if args.config else make_config(None, **over)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(args.command, cfg)
    except (LineDefectError, ValueError, OSError) as err:
        print(f"{args.command}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
