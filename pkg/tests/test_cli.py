import json

import pytest

from meddeconf.cli import main, read_config_file
from meddeconf.exceptions import ConfigurationError


def run(*argv):
    return main([str(a) for a in argv])


def test_staged_pipeline(tmp_path, capsys):
    cohort, fit, est = tmp_path / "cohort", tmp_path / "fit", tmp_path / "est"
    assert run("simulate", "--experiment", "MultiMed", "--seeds", 0, "--n-patients", 300, "--n-causes", 12, "--out", cohort) == 0
    assert (cohort / "truth.csv").exists() and (cohort / "confounders.csv").exists()
    assert run("fit-factor", "--cohort", cohort, "--factor-model", "PMF", "--k", 3, "--seeds", 0, "--out", fit) == 0
    assert {p.name for p in fit.iterdir()} >= {"fit.npz", "holdout.npz", "confounder.npz", "config.json"}

    # estimation refuses a fit that has not been checked
    assert run("estimate", "--cohort", cohort, "--fit-dir", fit, "--out", est) == 1
    assert not est.exists()

    code = run("check", "--cohort", cohort, "--fit-dir", fit, "--n-rep", 20, "--n-post", 20)
    result = json.loads((fit / "check.json").read_text())
    assert code == (0 if result["verdict"] == "Pass" else 2)
    assert "score" in capsys.readouterr().out

    assert run("estimate", "--cohort", cohort, "--fit-dir", fit, "--out", est, "--override-check") == 0
    assert (est / "effects.tsv").read_text().startswith("label\tmean\tstd_err")
    assert (est / "forest.svg").exists()


def test_failed_check_exit_code(tmp_path, capsys):
    cohort, fit = tmp_path / "cohort", tmp_path / "fit"
    run("simulate", "--experiment", "TwoMedNoCause", "--seeds", 1, "--out", cohort)
    run("fit-factor", "--cohort", cohort, "--factor-model", "PPCA", "--k", 1, "--seeds", 1, "--out", fit)
    assert run("check", "--cohort", cohort, "--fit-dir", fit, "--check-band", "0.99,1", "--n-rep", 10, "--n-post", 10) == 2
    capsys.readouterr()
    assert run("estimate", "--cohort", cohort, "--fit-dir", fit, "--out", tmp_path / "est") == 2
    assert "predictive check failed" in capsys.readouterr().err


def test_run_failed_check_writes_nothing(tmp_path):
    out = tmp_path / "run"
    code = run("run", "--experiment", "TwoMedNoCause", "--factor-model", "PPCA", "--seeds", 0,
               "--check-band", "0.99,1", "--n-rep", 10, "--n-post", 10, "--out", out)
    assert code == 2
    assert not out.exists()


def test_run_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run("run", "--experiment", "TwoMedOneCause", "--factor-model", "PPCA", "--seeds", "0-2",
                   "--n-rep", 20, "--n-post", 20, "--out", tmp_path / name) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "# two-medication study\n"
        "experiment = TwoMedOneCause\n"
        "factor-model = PPCA\n"
        "seeds = 3, 4\n"
        "check_band = 0.05,0.95\n"
        "override_check = yes\n"
        "n_rep = 10\n"
        "n_post = 10\n"
    )
    parsed = read_config_file(cfg)
    assert parsed["seeds"] == (3, 4) and parsed["override_check"] is True and parsed["n_rep"] == 10
    out = tmp_path / "run"
    assert run("run", "--config", cfg, "--seeds", 5, "--out", out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == [5]
    assert manifest["config"]["experiment"] == "TwoMedOneCause"


def test_bad_config_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("experiment TwoMedOneCause\n")
    with pytest.raises(ConfigurationError):
        read_config_file(cfg)
    assert run("run", "--config", cfg, "--out", tmp_path / "x") == 1


def test_report_subcommand(tmp_path, capsys):
    for model in ("None", "Oracle"):
        run("run", "--experiment", "MultiMed", "--factor-model", model, "--seeds", "0,1",
            "--n-patients", 300, "--n-causes", 10, "--out", tmp_path / model)
    capsys.readouterr()
    assert run("report", tmp_path / "None", tmp_path / "Oracle", "--out", tmp_path / "tables") == 0
    text = capsys.readouterr().out
    assert "Unadjusted" in text and "Oracle" in text
    assert (tmp_path / "tables" / "table.tsv").read_text().startswith("method\trmse")


def test_oracle_without_confounders_is_an_error(tmp_path):
    cohort = tmp_path / "cohort"
    run("simulate", "--experiment", "MultiMed", "--seeds", 0, "--n-patients", 50, "--n-causes", 5, "--out", cohort)
    (cohort / "confounders.csv").unlink()
    assert run("run", "--cohort", cohort, "--factor-model", "Oracle", "--out", tmp_path / "r") == 1


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "meddeconf", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("simulate", "fit-factor", "check", "estimate", "report", "run"):
        assert sub in proc.stdout
