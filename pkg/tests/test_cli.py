import json
import subprocess
import sys
from pathlib import Path

import pytest

from bnlslab.cli import EXIT_CHECKS, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, main, verify_manifest

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def cli(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def gs_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("gs")
    assert cli("run", CONFIGS / "groundstate.cfg", "--output", out) == EXIT_OK
    return out


def _json(path):
    return json.loads(Path(path).read_text())


def test_groundstate_outputs(gs_run):
    names = {p.name for p in gs_run.iterdir()}
    assert {"groundstate.json", "convergence.csv", "ground_state.bnls", "resolved.cfg", "manifest.json"} <= names
    rep = _json(gs_run / "groundstate.json")
    assert rep["converged"] and rep["energy"] < 0
    man = _json(gs_run / "manifest.json")
    assert man["exit_code"] == 0 and man["command"] == "groundstate"
    assert {f["path"] for f in man["files"]} == names - {"manifest.json"}
    assert verify_manifest(gs_run)


def test_manifest_detects_tampering(tmp_path, gs_run):
    out = tmp_path / "copy"
    out.mkdir()
    for p in gs_run.iterdir():
        (out / p.name).write_bytes(p.read_bytes())
    assert verify_manifest(out)
    (out / "groundstate.json").write_text("{}")
    assert not verify_manifest(out)


def test_rerun_bit_identical(tmp_path, gs_run):
    again = tmp_path / "again"
    assert cli("run", CONFIGS / "groundstate.cfg", "--output", again) == EXIT_OK
    for p in gs_run.iterdir():
        if p.name != "manifest.json":
            assert (again / p.name).read_bytes() == p.read_bytes(), p.name
    a, b = _json(gs_run / "manifest.json"), _json(again / "manifest.json")
    for key in ("started", "finished"):
        a.pop(key), b.pop(key)
    assert a == b


def test_resolved_config_alone_reruns(tmp_path, gs_run):
    out = tmp_path / "from_resolved"
    assert cli("run", gs_run / "resolved.cfg", "--output", out) == EXIT_OK
    assert (out / "ground_state.bnls").read_bytes() == (gs_run / "ground_state.bnls").read_bytes()


def test_set_flag_and_config_flag(tmp_path):
    out = tmp_path / "o"
    code = cli("run", "--config", CONFIGS / "groundstate.cfg", "--set", "model.mu=0.5", "--set", "grid.n=128",
               "--output", out)
    assert code == EXIT_OK
    assert "n = 128" in (out / "resolved.cfg").read_text()


def test_stability_and_evolve(tmp_path, gs_run):
    snap = gs_run / "ground_state.bnls"
    out = tmp_path / "stab"
    assert cli("run", CONFIGS / "stability.cfg", f"evolution.ground_state={snap}", "evolution.t_final=0.5",
               "--output", out) == EXIT_OK
    rep = _json(out / "stability.json")
    assert rep["delta"] == [0.001, 0.01] and not any(rep["blowup_flags"])
    assert all(s <= 10 * d for d, s in zip(rep["delta"], rep["sup_distance"]))
    out2 = tmp_path / "evo"
    assert cli("run", CONFIGS / "evolve.cfg", f"evolution.initial_path={snap}", f"evolution.reference_path={snap}",
               "evolution.t_final=0.2", "--output", out2) == EXIT_OK
    header = (out2 / "trace.csv").read_text().splitlines()[0]
    assert header == "t,mass,energy,h2_norm,orbit_distance"


def test_missing_snapshot_is_usage_error(tmp_path, capsys):
    code = cli("run", CONFIGS / "stability.cfg", f"evolution.ground_state={tmp_path / 'nope.bnls'}", "--output",
               tmp_path / "o")
    assert code == EXIT_USAGE
    err = capsys.readouterr().err
    assert "does not exist" in err and "groundstate" in err
    assert _json(tmp_path / "o" / "manifest.json")["exit_code"] == EXIT_USAGE


@pytest.mark.slow
def test_vpb_divergence_exit_code(tmp_path):
    out = tmp_path / "vpb"
    assert cli("run", CONFIGS / "vpb.cfg", "model.b=1.05*b_star", "--output", out) == EXIT_DIVERGED
    rep = _json(out / "groundstate.json")
    assert rep["status"] == "diverged" and rep["divergence"]


def test_gncheck(tmp_path):
    out = tmp_path / "gn"
    assert cli("run", CONFIGS / "gncheck.cfg", "thresholds.samples=50", "--output", out) == EXIT_OK
    rep = _json(out / "gn_report.json")
    assert rep["B_pd"] > 0 and rep["samples"] == 50


def test_usage_errors(tmp_path, capsys):
    assert cli("run", CONFIGS / "groundstate.cfg", "model.nope=1", "--output", tmp_path) == EXIT_USAGE
    assert cli("run", tmp_path / "missing.cfg") == EXIT_USAGE
    assert cli("reproduce", "everything") == EXIT_USAGE
    assert cli("run", CONFIGS / "groundstate.cfg", "--workers", "0") == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        cli("frobnicate")
    assert exc.value.code == EXIT_USAGE
    assert cli("run", CONFIGS / "groundstate.cfg", "model.p=9", "--output", tmp_path / "r") == EXIT_USAGE


def test_reproduce_exit_codes(monkeypatch, tmp_path):
    from bnlslab import cli as mod
    from bnlslab.suites import Check

    monkeypatch.setattr(mod, "run_suite", lambda name, workers, echo: [Check("1", "x", True, 0.0, 1.0)])
    assert cli("reproduce", "thresholds", "--output", tmp_path) == EXIT_OK
    assert "[PASS]" in (tmp_path / "reproduce_thresholds.txt").read_text()
    monkeypatch.setattr(mod, "run_suite", lambda name, workers, echo: [Check("1", "x", False, 2.0, 1.0)])
    assert cli("reproduce", "thresholds") == EXIT_CHECKS


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "bnlslab", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "bnlslab" in r.stdout
