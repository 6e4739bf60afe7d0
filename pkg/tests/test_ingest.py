import contextlib
import logging

import numpy as np
import pytest

from meddeconf.data import Cohort, ExposureMatrix
from meddeconf.exceptions import IngestError
from meddeconf.ingest import CohortFiles, filter_rare_causes, load_cohort, save_cohort
from meddeconf.simulation import MultiMedConfig, TwoMedConfig, simulate_multi_med, simulate_two_med


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_minimal_files(tmp_path):
    write(tmp_path / "exposures.csv", "patient_id,a,b\np1,0,1\np2,1,0\n")
    write(tmp_path / "outcomes.csv", "patient_id,outcome\np1,0.1\np2,-0.2\n")
    c = load_cohort(CohortFiles.in_directory(tmp_path))
    assert (c.n_patients, c.n_causes) == (2, 2)
    assert c.exposures.binary
    assert c.true_effects is None and c.true_confounders is None


def test_missing_outcome_drops_patient(tmp_path, caplog):
    write(tmp_path / "exposures.csv", "patient_id,a,b\np1,0,1\np2,1,0\np3,1,1\n")
    write(tmp_path / "outcomes.csv", "patient_id,outcome\np1,0.1\np3,NA\np2,0.5\n")
    with caplog.at_level(logging.WARNING), pytest.warns(UserWarning, match="dropped 1"):
        c = load_cohort(CohortFiles.in_directory(tmp_path))
    assert c.n_patients == 2
    np.testing.assert_array_equal(c.outcomes, [0.1, 0.5])
    assert "without an outcome" in caplog.text


def test_non_numeric_cell_names_position(tmp_path):
    write(tmp_path / "exposures.csv", "patient_id,a,b\np1,0,1\np2,x,0\n")
    write(tmp_path / "outcomes.csv", "patient_id,outcome\np1,0.1\np2,0.2\n")
    with pytest.raises(IngestError) as info:
        load_cohort(CohortFiles.in_directory(tmp_path))
    assert info.value.line == 3 and info.value.column == "a"
    assert "line 3" in str(info.value) and "'a'" in str(info.value)


@pytest.mark.parametrize(
    "exposures, outcomes",
    [
        ("patient_id,a,b\np1,0,1\np1,1,0\n", "patient_id,outcome\np1,0.1\n"),
        ("patient_id,a,b\np1,0,1,5\n", "patient_id,outcome\np1,0.1\n"),
        ("id,a,b\np1,0,1\n", "patient_id,outcome\np1,0.1\n"),
        ("patient_id,a,b\np1,0,1\n", "patient_id,outcome\np9,0.1\n"),
        ("", "patient_id,outcome\n"),
    ],
)
def test_malformed_files(tmp_path, exposures, outcomes):
    write(tmp_path / "exposures.csv", exposures)
    write(tmp_path / "outcomes.csv", outcomes)
    with pytest.warns(UserWarning) if "p9" in outcomes else contextlib.nullcontext():
        with pytest.raises(IngestError):
            load_cohort(CohortFiles.in_directory(tmp_path))


def test_empty_cause_dropped(tmp_path):
    write(tmp_path / "exposures.csv", "patient_id,a,b,c\np1,0,1,0\np2,1,0,0\n")
    write(tmp_path / "outcomes.csv", "patient_id,outcome\np1,0.1\np2,0.2\n")
    c = load_cohort(CohortFiles.in_directory(tmp_path))
    assert c.cause_labels == ("a", "b")
    kept = load_cohort(CohortFiles.in_directory(tmp_path), drop_empty_causes=False)
    assert kept.n_causes == 3


def test_round_trip_binary(tmp_path):
    c = simulate_multi_med(MultiMedConfig(n_patients=40, n_causes=6, seed=2))
    save_cohort(c, tmp_path)
    assert load_cohort(CohortFiles.in_directory(tmp_path), drop_empty_causes=False) == c


def test_round_trip_real(tmp_path):
    c = simulate_two_med(TwoMedConfig(n_patients=30, seed=1))
    files = save_cohort(c, tmp_path)
    assert files.truth_path.read_text().startswith("label,true_effect\n")
    back = load_cohort(CohortFiles.in_directory(tmp_path))
    assert back == c
    assert not back.exposures.binary


def test_tab_delimiter(tmp_path):
    c = simulate_two_med(TwoMedConfig(n_patients=5, seed=0))
    files = save_cohort(c, tmp_path, delimiter="\t")
    assert load_cohort(files) == c


def rare_cohort(freqs, labels):
    n = max(freqs) + 1
    a = np.zeros((n, len(freqs)))
    for j, f in enumerate(freqs):
        a[:f, j] = 1.0
    return Cohort(ExposureMatrix(a, binary=True), np.zeros(n), labels)


def test_filter_rare_causes_identity_at_zero():
    c = rare_cohort([3, 1, 2], ["a", "b", "c"])
    assert filter_rare_causes(c, 0.0) is c


def test_filter_removes_least_frequent():
    freqs = list(range(2, 22))
    labels = [f"m{j:02d}" for j in range(20)]
    freqs[7] = 1
    out = filter_rare_causes(rare_cohort(freqs, labels), 0.05)
    assert out.n_causes == 19 and "m07" not in out.cause_labels


def test_filter_tie_break_is_lexicographic(caplog):
    labels = [f"z{j}" for j in range(10)] + [f"a{j}" for j in range(10)]
    c = rare_cohort([4] * 20, labels)
    with caplog.at_level(logging.INFO, logger="meddeconf.ingest"):
        out = filter_rare_causes(c, 0.05)
    assert sorted(labels)[0] not in out.cause_labels
    assert out.n_causes == 19
    assert "tie" in caplog.text


def test_filter_keeps_retained_columns_intact():
    rng = np.random.default_rng(0)
    a = (rng.random((50, 20)) < rng.random(20)).astype(float)
    labels = [f"m{j:02d}" for j in range(20)]
    c = Cohort(ExposureMatrix(a, binary=True), np.zeros(50), labels)
    out = filter_rare_causes(c, 0.2)
    freq = a.sum(axis=0)
    removed = [j for j, lab in enumerate(labels) if lab not in out.cause_labels]
    kept = [j for j, lab in enumerate(labels) if lab in out.cause_labels]
    assert len(removed) == 4
    assert max(freq[removed]) <= min(freq[kept])
    for j_new, j in enumerate(kept):
        np.testing.assert_array_equal(out.exposures.values[:, j_new], a[:, j])
