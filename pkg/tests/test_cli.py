"""End-to-end runs of smgi.py main(): outputs, summaries and exit codes."""

import csv
import json

import pytest

from cli.constants import EXIT_CERTIFICATE_FAILED, EXIT_CONFIG_ERROR, EXIT_OK
from smgi import main


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch):
    monkeypatch.delenv("SMGI_SEED", raising=False)


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def _manifest_names(out_dir):
    data = json.loads((out_dir / "manifest.json").read_text())
    return [f["name"] for f in data["files"]]


def test_no_command_prints_help(capsys):
    assert main([]) == EXIT_CONFIG_ERROR


def test_bound_summary(capsys, out_dir):
    code, out = _run(capsys, "bound", "--kl", "2", "--L", "0.5", "--output-dir", str(out_dir))
    assert code == EXIT_OK
    assert "structural bound: 1.3009 (confidence 0.2009)" in out
    report = json.loads((out_dir / "report.json").read_text())
    assert report["total"] == pytest.approx(1.3009, abs=1e-4)
    assert _manifest_names(out_dir) == ["report.json", "run_config.json"]


def test_bound_sweep_writes_csv(capsys, out_dir):
    code, _ = _run(capsys, "bound", "--preset", "pacbayes_basic", "--kl", "2", "--sweep", "n=100,400",
                   "--output-dir", str(out_dir))
    assert code == EXIT_OK
    with open(out_dir / "bound_sweep.csv", newline="", encoding="utf-8") as f:
        assert len(list(csv.DictReader(f))) == 2


def test_sweeping_an_unused_parameter_is_a_config_error(capsys, out_dir):
    code, _ = _run(capsys, "bound", "--preset", "pacbayes_basic", "--sweep", "L=0,1", "--output-dir", str(out_dir))
    assert code == EXIT_CONFIG_ERROR


def test_unknown_config_field_exits_2(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"seed": 1, "colour": "blue"}))
    code = main(["certify", "--config", str(cfg), "--output-dir", str(tmp_path / "out")])
    assert code == EXIT_CONFIG_ERROR
    assert "field=colour" in capsys.readouterr().err


def test_missing_config_file_exits_2(capsys, tmp_path):
    code, _ = _run(capsys, "certify", "--config", str(tmp_path / "absent.json"))
    assert code == EXIT_CONFIG_ERROR


def test_certify_without_input_exits_2(capsys, out_dir):
    code, _ = _run(capsys, "certify", "--output-dir", str(out_dir))
    assert code == EXIT_CONFIG_ERROR


def test_certify_classical_embedding_passes(capsys, out_dir):
    code, out = _run(capsys, "certify", "--fixture", "classical_embedding", "--output-dir", str(out_dir))
    assert code == EXIT_OK
    assert "closure=pass" in out and "FAIL" not in out
    report = json.loads((out_dir / "report.json").read_text())
    assert report["first_failing"] is None


def test_certify_closure_fixture_fails(capsys, out_dir):
    code, out = _run(capsys, "certify", "--fixture", "closure_fail", "--output-dir", str(out_dir))
    assert code == EXIT_CERTIFICATE_FAILED
    assert "first failing: closure" in out


def test_exported_fixture_reruns_as_a_config(capsys, tmp_path):
    export_dir, run_dir = tmp_path / "export", tmp_path / "run"
    code, out = _run(capsys, "fixtures", "--export", "invariance_fail", "--seed", "4", "--output-dir", str(export_dir))
    assert code == EXIT_OK and "exported invariance_fail" in out
    code, out = _run(capsys, "certify", "--config", str(export_dir / "invariance_fail.json"),
                     "--output-dir", str(run_dir))
    assert code == EXIT_CERTIFICATE_FAILED
    assert "first failing: evaluative_invariance" in out
    saved = json.loads((run_dir / "run_config.json").read_text())
    assert saved["seed"] == 4 and saved["fixture"] == "invariance_fail"


def test_minimality_suite_exits_1_with_a_failing_diagonal(capsys, out_dir):
    code, out = _run(capsys, "fixtures", "--suite", "minimality", "--output-dir", str(out_dir))
    assert code == EXIT_CERTIFICATE_FAILED
    assert "matches expected = True" in out
    report = json.loads((out_dir / "report.json").read_text())
    assert report["matches_expected"] is True


def test_strict_inclusion_suite_exits_0(capsys, out_dir):
    code, out = _run(capsys, "fixtures", "--suite", "strict_inclusion", "--output-dir", str(out_dir))
    assert code == EXIT_OK
    assert "no_single_evaluator: pass" in out


def test_simulate_a_fixture(capsys, out_dir):
    code, out = _run(capsys, "simulate", "--fixture", "classical_embedding", "--horizon", "10",
                     "--output-dir", str(out_dir))
    assert code == EXIT_OK
    assert "simulated 10 steps" in out
    with open(out_dir / "trajectory.csv", newline="", encoding="utf-8") as f:
        assert len(list(csv.DictReader(f))) == 11


def test_gsrm_from_an_input_document(capsys, tmp_path):
    doc = tmp_path / "gsrm.json"
    doc.write_text(json.dumps({"step_losses": [[0.1, 0.5], [0.6, 0.2], [0.1, 0.5]], "alpha": 0.1,
                               "sequences": [[1, 1, 1]]}))
    out_dir = tmp_path / "out"
    code, out = _run(capsys, "gsrm", "--input", str(doc), "--mode", "dp", "--output-dir", str(out_dir))
    assert code == EXIT_OK
    assert "minimizer [1 2 1] value 0.6000" in out
    with open(out_dir / "gsrm.csv", newline="", encoding="utf-8") as f:
        assert [r["sequence"] for r in csv.DictReader(f)] == ["1 2 1", "1 1 1"]


def test_malformed_gsrm_document_exits_2(capsys, tmp_path):
    doc = tmp_path / "gsrm.json"
    doc.write_text(json.dumps({"step_losses": [[1.5]]}))
    code, _ = _run(capsys, "gsrm", "--input", str(doc), "--output-dir", str(tmp_path / "out"))
    assert code == EXIT_CONFIG_ERROR


def test_protocol_command(capsys, out_dir):
    code, out = _run(capsys, "protocol", "--axis", "evaluator_antagonism", "--levels", "0,1", "--steps", "5",
                     "--seeds", "2", "--grid", "5", "--output-dir", str(out_dir))
    assert code == EXIT_OK
    assert "smgi: no failure" in out
    assert "baseline: fails evaluative_invariance at level 1" in out
    assert set(_manifest_names(out_dir)) == {"protocol.csv", "report.json", "run_config.json"}


def test_identical_runs_give_identical_manifests(capsys, tmp_path):
    for name in ("a", "b"):
        _run(capsys, "certify", "--fixture", "strict_inclusion", "--seed", "2", "--output-dir", str(tmp_path / name))
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())["files"]
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())["files"]
    assert [f for f in a if f["name"] == "report.json"] == [f for f in b if f["name"] == "report.json"]


def test_seed_environment_override(capsys, out_dir, monkeypatch):
    monkeypatch.setenv("SMGI_SEED", "17")
    code, _ = _run(capsys, "bound", "--output-dir", str(out_dir))
    assert code == EXIT_OK
    assert json.loads((out_dir / "run_config.json").read_text())["seed"] == 17
