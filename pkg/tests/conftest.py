import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from linedefect.cone import ConeParams
from linedefect.energy import EnergyTrace
from linedefect.grid import load_snapshot, save_snapshot
import linedefect
from linedefect.presets import relax_preset, sample_oracle

K4 = ConeParams(4.0)


@pytest.fixture(scope="session")
def oracle33():
    return sample_oracle(4.0, 33)


@pytest.fixture(scope="session")
def oracle65():
    return sample_oracle(4.0, 65)


@pytest.fixture(scope="session")
def oracle129():
    return sample_oracle(4.0, 129)


def _trace_record(tr):
    return {"energies": list(tr.energies), "initial": tr.initial, "residual": tr.residual,
            "sweeps": tr.sweeps, "converged": tr.converged}


def _solver_hash():
    src = Path(linedefect.__file__).parent
    h = hashlib.sha256()
    for name in ("cone.py", "grid.py", "energy.py", "_kernels.py", "presets.py"):
        h.update((src / name).read_bytes())
    return h.hexdigest()[:12]


def _cached_relax(request, n, preset, **kw):
    """Relaxed field keyed on the package sources; the n = 129 solve takes minutes on one core."""
    d = request.config.cache.mkdir("linedefect")
    key = f"{preset}-{n}-{_solver_hash()}"
    snap = d / f"{key}.lfd"
    meta = d / f"{key}.trace.json"
    if snap.exists() and meta.exists():
        rec = json.loads(meta.read_text())
        levels = [(m, EnergyTrace(**t)) for m, t in rec["levels"]]
        return load_snapshot(snap), EnergyTrace(**rec["trace"]), levels
    f, trace, levels = relax_preset(4.0, n, preset, tol=1e-10, **kw)
    save_snapshot(f, snap, {"preset": preset})
    meta.write_text(json.dumps({"trace": _trace_record(trace),
                                "levels": [[m, _trace_record(t)] for m, t in levels]}))
    return f, trace, levels


@pytest.fixture(scope="session")
def relaxed_cyl65(request):
    return _cached_relax(request, 65, "cylindrical")


@pytest.fixture(scope="session")
def relaxed_pert65(request):
    return _cached_relax(request, 65, "perturbed-cylindrical", amp=0.1, mode=2)


@pytest.fixture(scope="session")
def relaxed_pert129(request):
    return _cached_relax(request, 129, "perturbed-cylindrical", amp=0.1, mode=2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(ACCEPTANCE, None)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(rows, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
