import json
import math

import pytest

from catproj.cli import PRESETS, main, resolve_config, validate_config
from catproj.fidelity import optimize_displacement
from catproj.fock import ScsMeasurementSpec, TruncationDim
from catproj.povm import IDEAL_DETECTOR
from catproj.serialize import read_click_table

SIM_CONFIG = {
    "alpha": 0.499,
    "c0sq": 0.5,
    "phi": round(math.pi / 2, 10),
    "drive_amplitude": 0.894,
    "drive_phase": round(math.pi / 2, 10),
    "eta": 0.689,
    "nu": 5.32e-5,
    "visibility": 0.998,
    "gammas": [0.2, 0.3],
    "shots": 2000,
    "seed": 3,
    "nmax": 16,
}


def write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def last_error(capsys) -> dict:
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


class FakeArgs:
    def __init__(self, **kw):
        self.preset = kw.get("preset")
        self.config = kw.get("config")
        self.seed = kw.get("seed")
        self.nmax = kw.get("nmax")
        self.threads = kw.get("threads")
        self.out = kw.get("out")


def test_config_precedence(tmp_path):
    path = write_config(tmp_path, {"shots": 50, "nmax": 12})
    cfg = resolve_config(FakeArgs(preset="fig3", config=path, seed=99))
    assert cfg["shots"] == 50  # file beats preset
    assert cfg["nmax"] == 12
    assert cfg["seed"] == 99  # flag beats file and preset
    assert cfg["alpha"] == 0.499  # untouched preset value survives


def test_validate_config_rejects_unknown_and_mistyped():
    with pytest.raises(ValueError, match="unknown config key"):
        validate_config({"bogus": 1})
    with pytest.raises(ValueError, match="wrong type"):
        validate_config({"alpha": "big"})
    with pytest.raises(ValueError, match="wrong type"):
        validate_config({"shots": True})
    assert validate_config({"alpha": 1}) == {"alpha": 1}  # int where float is fine


def test_presets_are_schema_valid():
    for name, preset in PRESETS.items():
        assert validate_config(dict(preset)) is not None, name


def test_fidelity_sweep_writes_reproducible_csv(tmp_path, capsys):
    cfg = {
        "c0sq_values": [0.5, 1.0],
        "alpha_sq_values": [0.25],
        "phi_values": [0.0],
        "nmax": 14,
    }
    path = write_config(tmp_path, cfg)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["fidelity-sweep", "--config", path, "--out", str(a)]) == 0
    assert main(["fidelity-sweep", "--config", path, "--out", str(b)]) == 0
    lines = a.read_text().splitlines()
    assert lines[0].startswith("# schema: catproj/sweep")
    assert sum(1 for line in lines if not line.startswith("#")) == 3  # header + 2 rows
    payload = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("#")]
    assert payload(a) == payload(b)


def test_fidelity_sweep_empty_grid_leaves_no_file(tmp_path, capsys):
    path = write_config(tmp_path, {"c0sq_values": [], "alpha_sq_values": [0.25], "phi_values": [0.0]})
    out = tmp_path / "never.csv"
    assert main(["fidelity-sweep", "--config", path, "--out", str(out)]) == 1
    record = last_error(capsys)
    assert record["stage"] == "config"
    assert not out.exists()


def test_optimize_prints_report(tmp_path, capsys):
    path = write_config(tmp_path, {"alpha": 0.5, "c0sq": 0.75, "phi": 0.0, "nmax": 14})
    assert main(["optimize", "--config", path]) == 0
    payload = json.loads(capsys.readouterr().out)
    beta, f = optimize_displacement(
        ScsMeasurementSpec.from_c0sq(0.5, 0.75, 0.0), IDEAL_DETECTOR, TruncationDim(14)
    )
    assert payload["f_dp"] == pytest.approx(f, abs=1e-9)
    assert payload["beta_opt_re"] == pytest.approx(beta.real, abs=1e-6)
    assert payload["f_pn"] == 0.75


def test_simulate_deterministic_and_readable(tmp_path):
    path = write_config(tmp_path, SIM_CONFIG)
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    assert main(["simulate", "--config", path, "--out", str(a)]) == 0
    assert main(["simulate", "--config", path, "--out", str(b)]) == 0
    assert main(["simulate", "--config", path, "--out", str(c), "--seed", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()
    table, meta = read_click_table(a)
    assert meta["seed"] == "3"
    assert len(table.probe_amplitudes) == 6
    assert float(max(table.shots)) == 2000.0


def test_tomography_ingest_matches_simulation_path(tmp_path, capsys):
    cfg_path = write_config(tmp_path, SIM_CONFIG)
    clicks = tmp_path / "clicks.csv"
    assert main(["simulate", "--config", cfg_path, "--out", str(clicks)]) == 0

    direct = tmp_path / "direct.json"
    assert main(["tomography", "--config", cfg_path, "--out", str(direct)]) == 0

    ingest_cfg = write_config(tmp_path, {**SIM_CONFIG, "clicks": str(clicks)}, "ingest.json")
    ingested = tmp_path / "ingested.json"
    assert main(["tomography", "--config", ingest_cfg, "--out", str(ingested)]) == 0

    a = json.loads(direct.read_text())
    b = json.loads(ingested.read_text())
    assert a["povm"] == b["povm"]
    assert a["expectations"] == b["expectations"]


def test_tomography_ingest_corrupted_table(tmp_path, capsys):
    cfg_path = write_config(tmp_path, SIM_CONFIG)
    clicks = tmp_path / "clicks.csv"
    assert main(["simulate", "--config", cfg_path, "--out", str(clicks)]) == 0
    text = clicks.read_text().splitlines()
    cells = text[-1].split(",")
    cells[3] = "999999"
    (tmp_path / "bad.csv").write_text("\n".join(text[:-1] + [",".join(cells)]) + "\n")

    bad_cfg = write_config(tmp_path, {**SIM_CONFIG, "clicks": str(tmp_path / "bad.csv")}, "bad.json")
    assert main(["tomography", "--config", bad_cfg, "--out", str(tmp_path / "x.json")]) == 1
    record = last_error(capsys)
    assert record["stage"] == "ingest"
    assert "sum" in record["message"]


def test_tomography_sweep_mode(tmp_path):
    cfg = {
        **{k: v for k, v in SIM_CONFIG.items() if k not in ("c0sq", "phi", "drive_amplitude", "drive_phase")},
        "mode": "sweep",
        "c0sq_values": [0.6, 1.0],
        "phi_values": [0.0],
        "quantize": False,
    }
    path = write_config(tmp_path, cfg)
    out = tmp_path / "recon.csv"
    assert main(["tomography", "--config", path, "--out", str(out)]) == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines[0].split(",")[:2] == ["c0sq", "phi"]
    rows = [line.split(",") for line in lines[1:]]
    assert [float(r[0]) for r in rows] == [0.6, 1.0]
    for row in rows:
        for cell in row[4:]:
            assert 0.0 <= float(cell) <= 1.0


def test_selftest_passes_and_reports(tmp_path, capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5
    assert "FAIL" not in out


def test_selftest_guards_small_truncation(capsys):
    # the published operating point is not certified at this cutoff; the
    # displacement guard turns that into a clean config-stage failure
    assert main(["selftest", "--nmax", "16"]) == 1
    assert last_error(capsys)["error"] == "CutoffTooSmallError"


def test_selftest_rejects_invalid_detector(tmp_path, capsys):
    path = write_config(tmp_path, {"eta": 1.3})
    assert main(["selftest", "--config", path]) == 1
    record = last_error(capsys)
    assert record["stage"] == "config"
    assert "eta" in record["message"]


def test_unknown_preset_and_key(tmp_path, capsys):
    assert main(["optimize", "--preset", "fig9"]) == 1
    assert "unknown preset" in last_error(capsys)["message"]
    path = write_config(tmp_path, {"mystery": 2})
    assert main(["optimize", "--config", path]) == 1
    assert "unknown config key" in last_error(capsys)["message"]


def test_threads_env_fallback(tmp_path, monkeypatch):
    cfg = {
        "c0sq_values": [0.5, 0.75, 1.0],
        "alpha_sq_values": [0.25],
        "phi_values": [0.0],
        "nmax": 12,
    }
    path = write_config(tmp_path, cfg)
    serial, threaded = tmp_path / "serial.csv", tmp_path / "threaded.csv"
    assert main(["fidelity-sweep", "--config", path, "--out", str(serial)]) == 0
    monkeypatch.setenv("CATPROJ_THREADS", "2")
    assert main(["fidelity-sweep", "--config", path, "--out", str(threaded)]) == 0
    strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("#")]
    assert strip(serial) == strip(threaded)
