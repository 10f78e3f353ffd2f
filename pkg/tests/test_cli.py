import json

import pytest
import yaml

from stablelab.cli import EXIT_ACCEPTANCE, EXIT_INVALID, EXIT_OK, main


@pytest.fixture
def config_file(tmp_path, ball_config):
    path = tmp_path / "ball.yaml"
    path.write_text(yaml.safe_dump(ball_config))
    return path


def test_counterexample_run(tmp_path, config_file, capsys):
    out = tmp_path / "run"
    code = main(["counterexample", "--config", str(config_file), "--out", str(out), "--seed", "3"])
    assert code == EXIT_OK
    assert str(out / "manifest.json") in capsys.readouterr().out
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["study"] == "counterexample"
    assert manifest["seed"] == 3


def test_invalid_config_exits_with_one(tmp_path, ball_config, capsys):
    path = tmp_path / "fat.yaml"
    path.write_text(yaml.safe_dump({**ball_config, "kfat": {"R": 1.5, "kappa": 0.9}}))
    code = main(["threeg", "--config", str(path), "--out", str(tmp_path / "run")])
    assert code == EXIT_INVALID
    assert "kfat.kappa" in capsys.readouterr().err
    assert not (tmp_path / "run").exists()


def test_missing_config_exits_with_one(tmp_path):
    assert main(["threeg", "--config", str(tmp_path / "absent.yaml")]) == EXIT_INVALID


def test_relativistic_without_mass_exits_with_one(tmp_path, config_file):
    assert main(["relativistic", "--config", str(config_file), "--out", str(tmp_path / "r")]) == EXIT_INVALID


def test_acceptance_failure_exits_with_two(tmp_path, config_file, monkeypatch):
    from stablelab import api

    monkeypatch.setitem(api.STUDIES, "certify", lambda ctx: api.StudyResult(accepted=False))
    assert main(["certify", "--config", str(config_file), "--out", str(tmp_path / "a")]) == EXIT_ACCEPTANCE
    assert main(["certify", "--config", str(config_file), "--out", str(tmp_path / "b"), "--strict"]) == EXIT_ACCEPTANCE


def test_report_summarizes_bundles(tmp_path, config_file, capsys):
    for seed in ("1", "2"):
        main(["counterexample", "--config", str(config_file), "--out", str(tmp_path / seed), "--seed", seed])
    capsys.readouterr()
    code = main(["report", str(tmp_path / "1"), str(tmp_path / "2" / "manifest.json")])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "counterexample PASS" in out
    assert "seed=2" in out


def test_report_missing_manifest(tmp_path):
    assert main(["report", str(tmp_path / "nowhere")]) == EXIT_INVALID


def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc_info:
        main(["nonsense"])
    assert exc_info.value.code == 2
