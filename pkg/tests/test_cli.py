import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from cmllab.cli import main


def write_config(tmp_path: Path, obj: dict, name="config.json") -> Path:
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def run_cli(args):
    return CliRunner().invoke(main, args)


def test_check_coupling_ok(tmp_path):
    cfgp = write_config(
        tmp_path,
        {
            "kind": "check-coupling",
            "lattice": {"d": 1, "L": 8, "eps": 0.02},
            "params": {"n_samples": 3},
            "master_seed": 1,
        },
    )
    out = tmp_path / "out"
    res = run_cli(["run", str(cfgp), "--out", str(out)])
    assert res.exit_code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["ok"] is True
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert "coupling_report.json" in manifest["outputs"]


def test_eps_above_max_is_config_error(tmp_path):
    cfgp = write_config(
        tmp_path,
        {"kind": "check-coupling", "lattice": {"d": 1, "L": 8, "eps": 0.5}},
    )
    out = tmp_path / "out"
    res = run_cli(["run", str(cfgp), "--out", str(out)])
    assert res.exit_code == 2
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["status"] == "config-error"


def test_unknown_keys_rejected(tmp_path):
    cfgp = write_config(tmp_path, {"kind": "clt", "bogus": 1})
    res = run_cli(["run", str(cfgp), "--out", str(tmp_path / "o")])
    assert res.exit_code == 2
    cfgp2 = write_config(tmp_path, {"kind": "clt", "params": {"zzz": 1}}, "c2.json")
    res = run_cli(["run", str(cfgp2), "--out", str(tmp_path / "o2")])
    assert res.exit_code == 2


def test_unknown_kind_rejected(tmp_path):
    cfgp = write_config(tmp_path, {"kind": "frobnicate"})
    res = run_cli(["run", str(cfgp), "--out", str(tmp_path / "o")])
    assert res.exit_code == 2


def test_bv_suite_runs(tmp_path):
    cfgp = write_config(
        tmp_path,
        {"kind": "bv-suite", "params": {"n_instances": 200, "n_cells": 32}},
    )
    out = tmp_path / "out"
    res = run_cli(["run", str(cfgp), "--out", str(out)])
    assert res.exit_code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["violations"] == 0


def test_spectrum_run_and_summary(tmp_path):
    cfgp = write_config(
        tmp_path,
        {
            "kind": "spectrum",
            "lattice": {"d": 1, "L": 8, "eps": 0.0},
            "params": {"k": 1, "N": 27},
        },
    )
    out = tmp_path / "out"
    res = run_cli(["run", str(cfgp), "--out", str(out)])
    assert res.exit_code == 0
    assert (out / "operator.mtx").exists()
    res2 = run_cli(["summary", str(out)])
    assert res2.exit_code == 0
    assert "spectral gap" in res2.output


def test_summary_missing_manifest(tmp_path):
    res = run_cli(["summary", str(tmp_path)])
    assert res.exit_code == 2


def test_variance_run(tmp_path):
    cfgp = write_config(
        tmp_path,
        {
            "kind": "variance",
            "lattice": {"d": 1, "L": 8, "eps": 0.0},
            "observable": {"kind": "coordinate", "site": [0], "center": True},
            "params": {"K": 10, "n_avg": 20000, "n_burn": 100},
            "master_seed": 5,
        },
    )
    out = tmp_path / "out"
    res = run_cli(["run", str(cfgp), "--out", str(out)])
    assert res.exit_code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["sigma2"] == pytest.approx(5.0 / 48.0, rel=0.2)
    assert (out / "autocov.csv").exists()


@pytest.mark.parametrize("workers", [1, 4, 8])
def test_determinism_across_worker_counts(tmp_path, workers):
    cfgp = write_config(
        tmp_path,
        {
            "kind": "clt",
            "lattice": {"d": 1, "L": 8, "eps": 0.02},
            "observable": {"kind": "coordinate", "site": [0], "center": True},
            "params": {"n": 64, "n_traj": 200, "n_burn": 50, "K": 10, "n_avg": 20000},
            "master_seed": 9,
        },
    )
    out = tmp_path / f"w{workers}"
    res = run_cli(["run", str(cfgp), "--workers", str(workers), "--out", str(out)])
    assert res.exit_code == 0
    data = (out / "samples.csv").read_bytes()
    ref_dir = tmp_path.parent / "determinism_ref"
    ref_dir.mkdir(exist_ok=True)
    ref = ref_dir / "samples.csv"
    if ref.exists():
        assert data == ref.read_bytes()
    else:
        ref.write_bytes(data)
