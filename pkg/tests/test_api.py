import json
from types import SimpleNamespace

import pytest

from stablelab import api
from stablelab.api import StudyResult, run_study
from stablelab.config import from_mapping
from stablelab.core.io.io_utils import read_csv
from stablelab.exceptions import AcceptanceError, ConfigError
from stablelab.lab.kato import YOUNG_CASES


def _cfg(base, **changes):
    return from_mapping({**base, **changes})


def test_threeg_bundle(tmp_path, ball_config):
    cfg = _cfg(ball_config, study_options={"green": "oracle"})
    outcome = run_study(cfg, out_dir=tmp_path)
    names = {p.name for p in tmp_path.iterdir()}
    assert {"manifest.json", "fit.json", "ratios.csv", "stability_threeg.csv", "stability_classical.csv"} <= names
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["study"] == "threeg"
    assert manifest["seed"] == 7
    assert manifest["config_hash"] == cfg.config_hash()
    assert manifest["tables"]["ratios"] == "ratios.csv"
    assert manifest["accepted"] == outcome.result.accepted
    assert manifest["frame"]["z0"] == [0.0, 0.0]
    assert "numpy" in manifest["versions"]
    fits = json.loads((tmp_path / "fit.json").read_text())
    assert fits["threeg"]["c_hat"] > 0


def test_threeg_rerun_writes_identical_tables(tmp_path, ball_config):
    cfg = _cfg(ball_config, study_options={"green": "oracle"})
    run_study(cfg, out_dir=tmp_path / "a")
    run_study(cfg, out_dir=tmp_path / "b")
    assert (tmp_path / "a" / "ratios.csv").read_text() == (tmp_path / "b" / "ratios.csv").read_text()


def test_counterexample_study_is_accepted(tmp_path, ball_config):
    outcome = run_study(_cfg(ball_config, study="counterexample"), out_dir=tmp_path)
    assert outcome.result.accepted
    sweep = read_csv(tmp_path / "sweep.csv")
    assert {"delta", "factor_free_ratio", "factored_ratio"} <= set(sweep.columns)
    assert outcome.result.fits["counterexample"]["factor_free_increasing"]


def test_counterexample_needs_a_ball(tmp_path, ball_config):
    cfg = _cfg(ball_config, study="counterexample", domain={"shape": "box", "lo": [0, 0], "hi": [4, 4]},
               frame={})
    with pytest.raises(ConfigError, match="needs a ball"):
        run_study(cfg, out_dir=tmp_path)


def test_certify_study_on_the_ball(tmp_path, ball_config):
    cfg = _cfg(ball_config, study="certify",
               study_options={"n_boundary": 8, "n_radii": 4, "n_ball_points": 2000})
    outcome = run_study(cfg, out_dir=tmp_path)
    assert outcome.result.accepted
    assert outcome.result.fits["kfat"]["failures"] == 0
    assert (tmp_path / "checks.csv").exists()


def test_sample_exit_reports_poisson_mass(tmp_path, ball_config):
    cfg = _cfg(ball_config, study="sample-exit", n_samples=2000, study_options={"start": [0.3, 0.0]})
    outcome = run_study(cfg, out_dir=tmp_path)
    fits = outcome.result.fits
    assert fits["poisson_mass"]["accepted"]
    assert 0.0 <= fits["exit_law"]["p_value"] <= 1.0
    measure = read_csv(tmp_path / "harmonic_measure.csv")
    assert measure["exact"].sum() == pytest.approx(1.0, abs=1e-3)
    assert measure["empirical"].sum() == pytest.approx(1.0)


def test_relativistic_study(tmp_path, ball_config):
    cfg = _cfg(ball_config, study="relativistic", process={"d": 2, "alpha": 1.0, "m": 1.0})
    outcome = run_study(cfg, out_dir=tmp_path)
    checks = outcome.result.fits["checks"]
    assert checks["psi_at_zero"] and checks["psi_decreasing"] and checks["levy_domination"]
    assert (tmp_path / "psi.csv").exists()
    assert (tmp_path / "q_m.csv").exists()


def test_green_study_independent_of_worker_count(tmp_path, ball_config):
    base = dict(ball_config, study="green", n_samples=5000, study_options={"n_pairs": 2})
    run_study(_cfg(base, workers=1), out_dir=tmp_path / "one")
    run_study(_cfg(base, workers=2), out_dir=tmp_path / "two")
    for name in ("pairs.csv", "green_table.csv"):
        assert (tmp_path / "one" / name).read_text() == (tmp_path / "two" / name).read_text()


def test_strict_run_raises_after_writing(tmp_path, ball_config, monkeypatch):
    monkeypatch.setitem(api.STUDIES, "certify", lambda ctx: StudyResult(accepted=False))
    cfg = _cfg(ball_config, study="certify")
    outcome = run_study(cfg, out_dir=tmp_path / "lenient")
    assert not outcome.result.accepted
    with pytest.raises(AcceptanceError):
        run_study(cfg, out_dir=tmp_path / "strict", strict=True)
    manifest = json.loads((tmp_path / "strict" / "manifest.json").read_text())
    assert manifest["accepted"] is False


def test_run_study_is_profiled(tmp_path, ball_config):
    run_study(_cfg(ball_config, study="counterexample"), out_dir=tmp_path)
    assert run_study.last_walltime is not None and run_study.last_walltime >= 0


def test_kato_study_takes_gamma_from_the_3g_fit(tmp_path, ball_config, monkeypatch):
    fitted = []

    def fake_fit(green, D, frame, n, gamma_grid, seed=None, **kwargs):
        fitted.append(gamma_grid)
        return SimpleNamespace(gamma_hat=fitted_gamma)

    monkeypatch.setattr(api, "fit_3g", fake_fit)
    options = {"green": "oracle", "betas": [1.5], "n_pairs": 2}
    cfg = _cfg(ball_config, study="kato", n_samples=200, gamma_grid=[0.25, 0.5, 1.0], study_options=options)

    fitted_gamma = 0.25
    outcome = run_study(cfg, out_dir=tmp_path / "fit")
    assert outcome.result.fits["gamma"] == {"gamma": 0.25, "source": "fit_3g"}
    assert fitted == [(0.25, 0.5, 1.0)]
    young = read_csv(tmp_path / "fit" / "young.csv")
    assert set(young["case"]) == set(YOUNG_CASES)

    fitted_gamma = None
    outcome = run_study(cfg, out_dir=tmp_path / "fallback")
    assert outcome.result.fits["gamma"] == {"gamma": 0.5, "source": "fallback"}

    pinned = _cfg(ball_config, study="kato", n_samples=200, study_options={**options, "gamma": 0.75})
    assert run_study(pinned, out_dir=tmp_path / "pinned").result.fits["gamma"] == {"gamma": 0.75, "source": "config"}
    assert len(fitted) == 2
