import numpy as np
import pytest

from meddeconf.data import Cohort, ExposureMatrix, SubstituteConfounder, as_array, validate_cohort
from meddeconf.exceptions import CohortValidationError, DimensionMismatchError, NonBinaryEntryError


def test_minimal_cohort_is_accepted(tiny_cohort):
    out = validate_cohort(tiny_cohort)
    assert out.n_patients == 2 and out.n_causes == 2


def test_validate_is_idempotent(tiny_cohort):
    once = validate_cohort(tiny_cohort)
    assert validate_cohort(once) == once


def test_outcome_length_mismatch():
    c = Cohort(ExposureMatrix([[0, 1], [1, 0]]), [0.1, 0.2, 0.3], ("a", "b"))
    with pytest.raises(DimensionMismatchError) as info:
        validate_cohort(c)
    assert info.value.field == "outcomes"


def test_non_binary_entry():
    c = Cohort(ExposureMatrix([[0, 0.5], [1, 0]], binary=True), [0.1, 0.2], ("a", "b"))
    with pytest.raises(NonBinaryEntryError):
        validate_cohort(c)


def test_single_cause_rejected():
    c = Cohort(ExposureMatrix([[0.0], [1.0]]), [0.1, 0.2], ("a",))
    with pytest.raises(DimensionMismatchError):
        validate_cohort(c)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"cause_labels": ("a", "a")},
        {"cause_labels": ("a", "b", "c")},
        {"outcomes": [np.nan, 0.0]},
        {"true_effects": [0.1, 0.2, 0.3]},
        {"true_confounders": np.zeros((3, 1))},
    ],
)
def test_invalid_fields(kwargs):
    base = dict(exposures=ExposureMatrix([[0, 1], [1, 0]]), outcomes=[0.1, 0.2], cause_labels=("a", "b"))
    base.update(kwargs)
    with pytest.raises(CohortValidationError):
        validate_cohort(Cohort(**base))


def test_arrays_are_read_only(tiny_cohort):
    with pytest.raises(ValueError):
        tiny_cohort.outcomes[0] = 5.0
    with pytest.raises(ValueError):
        tiny_cohort.exposures.values[0, 0] = 5.0


def test_construction_copies_input():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    m = ExposureMatrix(a)
    a[0, 0] = 7.0
    assert m.values[0, 0] == 0.0


def test_select_causes_keeps_truth_aligned():
    c = Cohort(ExposureMatrix(np.eye(3)), [1.0, 2.0, 3.0], ("x", "y", "z"), true_effects=[0.1, 0.2, 0.3])
    sub = c.select_causes([2, 0])
    assert sub.cause_labels == ("z", "x")
    np.testing.assert_array_equal(sub.true_effects, [0.3, 0.1])
    np.testing.assert_array_equal(sub.exposures.values[:, 0], [0, 0, 1])


def test_substitute_confounder_positivity():
    SubstituteConfounder(np.array([[-1.0], [2.0]]), "PPCA")
    with pytest.raises(CohortValidationError):
        SubstituteConfounder(np.array([[0.0], [2.0]]), "PMF")
    with pytest.raises(ValueError):
        SubstituteConfounder(np.ones((2, 1)), "ICA")
    assert SubstituteConfounder(np.ones((4, 3)), "DEF").k_dim == 3


def test_as_array_accepts_all_containers(tiny_cohort):
    expected = np.array([[0.0, 1.0], [1.0, 0.0]])
    for obj in (tiny_cohort, tiny_cohort.exposures, expected):
        np.testing.assert_array_equal(as_array(obj), expected)
