import json
import subprocess
import sys

import pytest

from linedefect.cli import EXIT_CONFIG, EXIT_OK, main
from linedefect.config import ConfigError, load_config, make_config
from linedefect.grid import load_snapshot, save_snapshot
from linedefect.io import fmt, read_csv, write_csv


def write_cfg(tmp_path, **data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return str(p)


def test_config_defaults_and_ranges():
    cfg = make_config()
    assert cfg.kappa == 4.0 and cfg.n == 65 and cfg.radii == [0.125, 0.25, 0.5]
    with pytest.raises(ConfigError, match="kappa"):
        make_config(kappa=0.5)
    with pytest.raises(ConfigError, match="radii"):
        make_config(radii=[0.1, -1.0])
    with pytest.raises(ConfigError, match="field_path"):
        make_config(preset="from-file")


def test_config_error_exit_code(tmp_path, capsys):
    path = write_cfg(tmp_path, n=3)
    assert main(["oracle", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "config error" in err and "n:" in err


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="bogus"):
        load_config(write_cfg(tmp_path, bogus=1))


def test_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(p)


def test_oracle_snapshot_round_trip(tmp_path):
    out = tmp_path / "o"
    path = write_cfg(tmp_path, n=17)
    assert main(["oracle", "--config", path, "--out", str(out)]) == EXIT_OK
    f = load_snapshot(out / "field.lfd")
    assert f.n == 17
    save_snapshot(f, tmp_path / "again.lfd", json.loads((out / "field.lfd.json").read_text()))
    assert (tmp_path / "again.lfd").read_bytes() == (out / "field.lfd").read_bytes()


def test_relax_constant_one_line_trace(tmp_path):
    out = tmp_path / "r"
    path = write_cfg(tmp_path, n=9, preset="constant")
    assert main(["relax", "--config", path, "--out", str(out)]) == EXIT_OK
    meta, header, rows = read_csv(out / "energy_trace.csv")
    assert header == ["sweep", "energy"]
    assert len(rows) == 1 and float(rows[0][1]) == 0.0
    assert meta["n"] == "9" and "build" in meta


def test_analyze_empty_defect_field(tmp_path):
    out = tmp_path / "a"
    path = write_cfg(tmp_path, n=33, preset="constant", radii=[0.25, 0.5])
    assert main(["analyze", "--config", path, "--out", str(out)]) == EXIT_OK
    _, header, rows = read_csv(out / "zero_set.csv")
    assert header == ["x1", "x2", "x3", "weight", "polyline_id", "order_in_polyline"]
    assert rows == []


def test_analyze_oracle_outputs(tmp_path):
    out = tmp_path / "a"
    path = write_cfg(tmp_path, n=65, radii=[0.25, 0.5], n_pairs=2)
    assert main(["analyze", "--config", path, "--out", str(out)]) == EXIT_OK
    _, header, rows = read_csv(out / "frequency.csv")
    assert header[-1] == "N_phi" and len(rows) == 2
    assert all(abs(float(r[-1]) - 0.25) < 0.01 for r in rows)
    _, _, zrows = read_csv(out / "zero_set.csv")
    assert len(zrows) == 63
    assert (out / "analyze.json").exists()


def test_cover_command(tmp_path):
    out = tmp_path / "c"
    path = write_cfg(tmp_path, n=65, cover_depth=2, minkowski_r=0.5)
    assert main(["cover", "--config", path, "--out", str(out)]) == EXIT_OK
    rec = json.loads((out / "cover.json").read_text())
    assert len(rec["packing_sums"]) == 3


def test_verify_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"v{k}"
        path = write_cfg(tmp_path, n=33, radii=[0.5])
        main(["verify", "--config", path, "--out", str(out), "--seed", "7"])
        outs.append((out / "verify.json").read_bytes())
    assert outs[0] == outs[1]


def test_report_command(tmp_path):
    out = tmp_path / "rep"
    path = write_cfg(tmp_path, n=9, preset="constant")
    main(["relax", "--config", path, "--out", str(out)])
    assert main(["report", "--config", path, "--out", str(out)]) == EXIT_OK
    assert (out / "report.json").exists()


def test_csv_writer_deterministic(tmp_path):
    rows = [[1, 0.1, None, True], [2, float("nan"), "x", False]]
    write_csv(tmp_path / "a.csv", ("a", "b", "c", "d"), rows, {"seed": 1})
    write_csv(tmp_path / "b.csv", ("a", "b", "c", "d"), rows, {"seed": 1})
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert fmt(0.1) == "0.1" and fmt(None) == "" and fmt(True) == "true"


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "linedefect", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "verify" in r.stdout
