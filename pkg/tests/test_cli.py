import csv
import json
import math
import re
import subprocess
import sys

import pytest

from bethe_ff import cli


def _run(tmp_path, command, *sets, config=None):
    args = [command, "--set", f"output.directory={tmp_path}"]
    for s in sets:
        args += ["--set", s]
    if config is not None:
        args += ["--config", str(config)]
    return cli.main(args)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_arith_values():
    assert cli._real("pi/3") == pytest.approx(math.pi / 3)
    assert cli._parse_value("complex", "0.1 + 0.2*j") == 0.1 + 0.2j
    with pytest.raises(ValueError):
        cli._real("__import__('os')")


def test_dressed_free_fermion_charge(tmp_path):
    assert _run(tmp_path, "dressed", "model.zeta=pi/2", "experiment.n_lambda=5") == 0
    rows = _rows(tmp_path / "dressed.csv")
    assert len(rows) == 5
    assert all(abs(float(r["Z"]) - 1) < 1e-13 for r in rows)
    man = json.loads((tmp_path / "run.json").read_text())
    assert man["status"] == "ok"
    assert man["result"]["det_id_plus_K"] == pytest.approx(1.0, abs=1e-13)


def test_boundary_monotone(tmp_path):
    assert _run(tmp_path, "boundary", "experiment.n_h=6", "model.n_quad=64") == 0
    qs = [float(r["q"]) for r in _rows(tmp_path / "boundary.csv")]
    assert all(a > b for a, b in zip(qs, qs[1:]))


def test_reruns_are_byte_identical(tmp_path):
    sets = ("experiment.L=16,24", "experiment.holes=0", "experiment.particles=1")
    names = ("bethe.csv", "bethe.json", "run.json")
    assert _run(tmp_path, "bethe", *sets) == 0
    first = {n: (tmp_path / n).read_bytes() for n in names}
    assert _run(tmp_path, "bethe", *sets) == 0
    assert all(first[n] and first[n] == (tmp_path / n).read_bytes() for n in names)


def test_unknown_key_exit_2(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(["dressed", "--set", "model.nonsense=1"]) == 2
    man = json.loads((tmp_path / "run.json").read_text())
    assert man["status"] == "config_invalid"


def test_config_file_unknown_section(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[modle]\nzeta = 1\n")
    assert cli.main(["dressed", "--config", str(cfg)]) == 2


def test_config_file_values(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[model]\nzeta = pi/2  # free fermions\nh_frac = 0.3\n[experiment]\nn_lambda = 3\n")
    assert _run(tmp_path, "dressed", config=cfg) == 0
    assert len(_rows(tmp_path / "dressed.csv")) == 3


def test_computation_failure_leaves_manifest(tmp_path):
    # hole quantum number outside the sea
    assert _run(tmp_path, "bethe", "experiment.L=16", "experiment.holes=99", "experiment.particles=100") == 1
    man = json.loads((tmp_path / "run.json").read_text())
    assert man["status"] == "computation_failed"


def test_tolerance_override_fails_check(tmp_path, capsys):
    code = _run(tmp_path, "selftest", "experiment.checks=2", "tolerance.c2_abs=1e-30")
    assert code == 1
    assert re.search(r"^\[FAIL\]\s+2 ", capsys.readouterr().out, re.M)
    man = json.loads((tmp_path / "run.json").read_text())
    assert man["failed_checks"] == [2]
    assert _run(tmp_path, "selftest", "experiment.checks=2,3") == 0


def test_scaling_and_ff_thermo(tmp_path):
    assert _run(tmp_path, "scaling", "experiment.L=32,64") == 0
    rows = _rows(tmp_path / "scaling.csv")
    assert all(abs(float(r["ratio"]) - 1) < 0.01 for r in rows)
    fit = {r["series"]: float(r["slope"]) for r in _rows(tmp_path / "scaling_fit.csv")}
    assert fit["finite"] == pytest.approx(fit["asymptotic"], abs=0.05)
    assert _run(tmp_path, "ff-thermo", "experiment.L=100,1000", "excitation.umklapp=0,1",
                "excitation.p_R=0", "excitation.spin_deficit=-1") == 0
    assert len(_rows(tmp_path / "ff_thermo.csv")) == 2


def test_excitation_umklapp_mismatch_is_config_error(tmp_path):
    assert _run(tmp_path, "excitation", "excitation.umklapp=0,1") == 2


def test_csv_only_format(tmp_path):
    assert _run(tmp_path, "excitation", "output.formats=csv", "experiment.L=10") == 0
    assert (tmp_path / "excitation.csv").exists()
    assert not (tmp_path / "excitation.json").exists()


def test_workers_env(monkeypatch):
    monkeypatch.setenv("BETHE_FF_WORKERS", "3")
    assert cli._workers(None) == 3
    assert cli._workers(2) == 2
    monkeypatch.setenv("BETHE_FF_WORKERS", "x")
    with pytest.raises(cli.ConfigInvalid):
        cli._workers(None)


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "bethe_ff.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "selftest" in res.stdout
