import csv
import json

import pytest

from paramguide.cli import EXIT_ACCURACY, EXIT_CONFIG, main


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_spectrum_deterministic(tmp_path):
    a, b = tmp_path / "a" / "s.csv", tmp_path / "b" / "s.csv"
    a.parent.mkdir(), b.parent.mkdir()
    for out in (a, b):
        assert main(["spectrum", "--samples", "101", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _rows(a)
    assert rows[0] == ["nu_thz", "signal_density", "noise_te_density", "noise_tm_density"]
    assert len(rows) == 102
    manifest = json.loads((a.parent / "manifest.json").read_text())
    assert set(manifest) >= {"config_hash", "subcommand", "flags", "artifact_paths", "wall_time_s", "version"}
    assert manifest["subcommand"] == "spectrum"
    assert manifest["config_hash"] == json.loads((b.parent / "manifest.json").read_text())["config_hash"]


def test_correlation(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["correlation", "--samples", "11", "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 12


def test_qpump_modes(tmp_path):
    for mode in ("two-band", "n-band", "asymptotic"):
        out = tmp_path / f"{mode}.csv"
        code = main(["qpump", "--mode", mode, "--steps", "200", "--record-every", "20", "--out", str(out)])
        assert code == 0, mode
        header = _rows(out)[0]
        assert header[:3] == ["z_cm", "abs_cp_sq", "sum_cw_sq"]


def test_ivp(tmp_path):
    out = tmp_path / "ivp.json"
    assert main(["ivp", "--m-abs", "1e-27", "--t-int-s", "1e-1", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["n"][0] == 0 and data["leak"] <= 1e-9
    assert main(["ivp", "--m-abs", "1e-26", "--t-int-s", "1", "--nmax", "8", "--out", str(out)]) == EXIT_ACCURACY


def test_verify_family(tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "--family", "fock", "--family", "coupling", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert [r["case"] for r in report] == ["fock_tanh_law", "coupling_consistency"]
    assert all(r["pass"] for r in report)


def test_sweep(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--lengths", "0.05,0.1", "--samples", "51", "--out-dir", str(out)]) == 0
    summary = _rows(out / "sweep_summary.csv")
    assert len(summary) == 3
    assert (out / "manifest.json").exists()
    assert main(["sweep", "--lengths", "a,b", "--out-dir", str(out)]) == EXIT_CONFIG


def test_bad_inputs(tmp_path):
    assert main(["spectrum", "--bogus"]) == EXIT_CONFIG
    assert main(["spectrum", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["spectrum", "--config", str(bad)]) == EXIT_CONFIG


def test_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PARAMGUIDE_THREADS", "zero")
    assert main(["sweep", "--lengths", "0.1", "--samples", "11", "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    monkeypatch.setenv("PARAMGUIDE_THREADS", "1")
    assert main(["sweep", "--lengths", "0.1", "--samples", "11", "--out-dir", str(tmp_path)]) == 0
