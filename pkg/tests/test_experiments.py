import json
import subprocess
import sys

import numpy as np
import pytest

from phonon_radiance import cli, experiments
from phonon_radiance.errors import ValidationError
from phonon_radiance.series import format_csv, read_csv


def test_overrides_parse_json_and_strings(tmp_path):
    cfg = experiments.load_config(overrides=["waveguide.nonlinearity=4", "spins.positions=[0,3]",
                                             "dicke.kind=superradiance"])
    assert cfg["waveguide"]["nonlinearity"] == 4
    assert cfg["spins"]["positions"] == [0, 3]
    assert cfg["dicke"]["kind"] == "superradiance"
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"waveguide": {"n_sites": 41}}))
    cfg = experiments.load_config(path, ["waveguide.hopping=2"])
    assert cfg["waveguide"]["n_sites"] == 41 and cfg["waveguide"]["hopping"] == 2
    assert cfg["waveguide"]["nonlinearity"] == experiments.DEFAULT_CONFIG["waveguide"]["nonlinearity"]


@pytest.mark.parametrize("override,invariant", [
    (["spins.frequency=-1.5"], "omega_e - omega_r < -2J"),
    (["spins.positions=[0,99]"], "0 <= n_j < N_r"),
    (["waveguide.hopping=-1"], "J > 0"),
    (["numerics.n_t=1"], "n_t >= 2"),
])
def test_validation_before_compute(tmp_path, override, invariant):
    cfg = experiments.load_config(overrides=override)
    with pytest.raises(ValidationError) as info:
        experiments.run(cfg, tmp_path / "out")
    assert info.value.invariant == invariant
    assert not (tmp_path / "out").exists()


def test_csv_dialect_roundtrip(tmp_path):
    text = format_csv(["a", "b"], [(0.1, 1), (1e-300, -2.5)], {"note": "x", "v": 0.5})
    assert text.startswith("# note: x\n# v: 0.5\na,b\n0.1,1\n")
    assert "\r" not in text
    (tmp_path / "f.csv").write_text(text)
    meta, header, data = read_csv(tmp_path / "f.csv")
    assert meta == {"note": "x", "v": "0.5"} and header == ["a", "b"]
    assert data[1, 0] == 1e-300


def test_band_run_writes_analytic_and_ed_columns(tmp_path):
    cfg = experiments.load_config(overrides=["experiment=band", "waveguide.n_sites=21", "waveguide.nonlinearity=4"])
    manifest = experiments.run(cfg, tmp_path)
    assert manifest["status"] == "complete"
    meta, header, data = read_csv(tmp_path / "band.csv")
    assert header[:3] == ["K", "E_analytic", "E_ed"]
    assert np.max(np.abs(data[:, 1] - data[:, 2])) < 1e-6
    saved = json.loads((tmp_path / "manifest.json").read_text())
    assert saved["config"]["waveguide"]["n_sites"] == 21
    assert set(saved["timestamps"]) == {"started", "finished"}


def test_rerun_is_byte_identical(tmp_path):
    cfg = experiments.load_config(overrides=["experiment=decay", "waveguide.n_sites=20", "numerics.n_t=11"])
    experiments.run(cfg, tmp_path / "a")
    experiments.run(cfg, tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        other = (tmp_path / "b" / f.name)
        if f.name == "manifest.json":
            a, b = json.loads(f.read_text()), json.loads(other.read_text())
            a.pop("timestamps"), b.pop("timestamps")
            assert a == b
        else:
            assert f.read_bytes() == other.read_bytes(), f.name


def test_incomplete_manifest_left_on_failure(tmp_path, monkeypatch):
    def boom(config, out):
        (out / "partial.csv").write_text("x\n")
        raise RuntimeError("simulated failure")

    monkeypatch.setitem(experiments.RUNNERS, "corr", boom)
    cfg = experiments.load_config(overrides=["experiment=corr"])
    with pytest.raises(RuntimeError):
        experiments.run(cfg, tmp_path)
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "incomplete"


def test_reproduce_fig7_outputs(tmp_path):
    assert cli.main(["reproduce", "fig7", "--out", str(tmp_path), "--quiet"]) == 0
    snaps = sorted(p.name for p in tmp_path.glob("fig7_snapshot_*.csv"))
    assert snaps == [f"fig7_snapshot_{i}.csv" for i in range(4)]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert all("bimodal" in s for s in summary["supercorrelated"])


def test_cli_error_is_json_on_stderr(tmp_path, capsys):
    code = cli.main(["corr", "--out", str(tmp_path), "--set", "spins.frequency=0"])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "validation" and err["invariant"] == "omega_e - omega_r < -2J"


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "phonon_radiance.cli", "feasibility", "--out", str(tmp_path)],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["status"] == "complete"
    assert "J consistency check" in (tmp_path / "feasibility.txt").read_text()


@pytest.mark.parametrize("command,extra", [
    ("corr", ["--set", "spins.K0=1.445", "--set", "waveguide.nonlinearity=4", "--set", "waveguide.n_sites=41"]),
    ("subradiance", ["--set", "spins.positions=[0,1,2]", "--set", "waveguide.nonlinearity=1",
                     "--set", "spins.frequency=-2.04", "--set", "numerics.n_t=5"]),
    ("lindblad", ["--set", "spins.positions=[0,2]", "--set", "spins.K0=1.445",
                  "--set", "waveguide.nonlinearity=4", "--set", "numerics.n_t=5"]),
    ("dicke", ["--set", "dicke.N=10"]),
    ("grouped", ["--set", "numerics.n_t=21"]),
])
def test_subcommands_complete(tmp_path, command, extra):
    assert cli.main([command, "--out", str(tmp_path), "--quiet", *extra]) == 0
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "complete"
