"""Deterministic CSV / JSON writers with provenance headers and atomic replacement."""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import os
from pathlib import Path

_PKG = Path(__file__).resolve().parent


def build_id() -> str:
    """Short content hash of the package sources."""
    h = hashlib.sha256()
    for p in sorted(_PKG.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    try:
        f = float(v)
    except (TypeError, ValueError):
        return str(v)
    if math.isnan(f):
        return "nan"
    return repr(f)


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_csv(path, header, rows, meta: dict | None = None) -> None:
    buf = _io.StringIO()
    for k in sorted(meta or {}):
        buf.write(f"# {k}={fmt(meta[k])}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    atomic_write_bytes(path, buf.getvalue().encode())


def read_csv(path) -> tuple[dict, list, list]:
    meta, lines = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# "):
                k, _, v = line[2:].rstrip("\n").partition("=")
                meta[k] = v
            else:
                lines.append(line)
    rows = list(csv.reader(lines))
    if not rows:
        return meta, [], []
    return meta, rows[0], rows[1:]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _clean(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n"


def write_json(path, obj, meta: dict | None = None) -> None:
    rec = dict(obj)
    if meta is not None:
        rec["meta"] = meta
    atomic_write_bytes(path, dumps(rec).encode())


def provenance(h: float, n: int, kappa: float, seed: int) -> dict:
    return {"h": h, "n": n, "kappa": kappa, "seed": seed, "build": build_id()}
