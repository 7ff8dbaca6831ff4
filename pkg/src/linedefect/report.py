"""Turn the per-command CSV outputs of a run directory into plot-ready tables."""
from __future__ import annotations

import os
from collections import defaultdict

import numpy as np

from .io import read_csv, write_csv, write_json


def _floats(rows, cols, header):
    idx = [header.index(c) for c in cols]
    out = []
    for row in rows:
        vals = []
        for i in idx:
            try:
                vals.append(float(row[i]))
            except (ValueError, IndexError):
                vals.append(float("nan"))
        out.append(vals)
    return np.array(out, dtype=float).reshape(-1, len(cols))


def _frequency_table(path, meta):
    _, header, rows = read_csv(path)
    a = _floats(rows, ["x1", "x2", "x3", "r", "N_phi"], header)
    by_r = defaultdict(list)
    for row in a:
        by_r[row[3]].append(row[4])
    table = [[r, len(v), float(np.min(v)), float(np.mean(v)), float(np.max(v))] for r, v in sorted(by_r.items())]
    write_csv(path.replace("frequency.csv", "report_frequency.csv"), ("r", "count", "N_min", "N_mean", "N_max"),
              table, meta)
    return {"radii": len(table)}


def _trace_table(path, meta):
    _, header, rows = read_csv(path)
    a = _floats(rows, ["sweep", "energy"], header)
    if len(a) == 0:
        return {"sweeps": 0}
    e = a[:, 1]
    drop = np.concatenate([[float("nan")], (e[:-1] - e[1:]) / np.where(e[:-1] > 0, e[:-1], 1.0)])
    write_csv(path.replace("energy_trace.csv", "report_trace.csv"), ("sweep", "energy", "rel_drop"),
              [[int(s), en, d] for s, en, d in zip(a[:, 0], e, drop)], meta)
    return {"sweeps": int(a[-1, 0]), "final_energy": float(e[-1])}


def _defect_table(path, meta, bins: int = 20):
    _, header, rows = read_csv(path)
    v = _floats(rows, ["N_phi"], header)[:, 0]
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"points": 0}
    counts, edges = np.histogram(v, bins=bins)
    write_csv(path.replace("defect_frequency.csv", "report_defect_histogram.csv"), ("lo", "hi", "count"),
              [[lo, hi, int(c)] for lo, hi, c in zip(edges[:-1], edges[1:], counts)], meta)
    return {"points": int(v.size), "median": float(np.median(v))}


TABLES = {
    "frequency.csv": _frequency_table,
    "energy_trace.csv": _trace_table,
    "defect_frequency.csv": _defect_table,
}


def build_report(out_dir: str, meta: dict) -> list:
    """Writes one report table per recognised input plus report.json; returns the input names used."""
    found = {}
    for name, fn in TABLES.items():
        path = os.path.join(out_dir, name)
        if os.path.exists(path):
            found[name] = fn(path, meta)
    if found:
        write_json(os.path.join(out_dir, "report.json"), {"tables": found}, meta)
    return sorted(found)
