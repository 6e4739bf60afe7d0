"""Core containers: exposure matrices, cohorts and substitute confounders.

All containers are frozen and hold read-only numpy arrays, so they can be
shared freely once constructed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import CohortValidationError, DimensionMismatchError, NonBinaryEntryError

__all__ = [
    "ExposureMatrix",
    "Cohort",
    "SubstituteConfounder",
    "validate_cohort",
    "as_array",
]

SOURCE_MODELS = ("PPCA", "PMF", "DEF")


def _frozen(x, dtype=float):
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _optional_equal(a, b):
    if a is None or b is None:
        return a is None and b is None
    return a.shape == b.shape and np.array_equal(a, b)


@dataclass(frozen=True, eq=False)
class ExposureMatrix:
    """N x D matrix of per-patient cause assignments.

    Parameters
    ----------
    values : array-like, shape (n_patients, n_causes)
    binary : bool
        Whether entries are restricted to {0, 1}.
    """

    values: np.ndarray
    binary: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "binary", bool(self.binary))

    @property
    def n_patients(self) -> int:
        return self.values.shape[0]

    @property
    def n_causes(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, ExposureMatrix):
            return NotImplemented
        return self.binary == other.binary and _optional_equal(self.values, other.values)

    def validate(self) -> "ExposureMatrix":
        v = self.values
        if v.ndim != 2:
            raise DimensionMismatchError("exposures", "2-d matrix", f"{v.ndim}-d array")
        if v.shape[0] < 1:
            raise DimensionMismatchError("exposures", "N >= 1 patients", v.shape[0])
        if v.shape[1] < 2:
            raise DimensionMismatchError("exposures", "D >= 2 causes", v.shape[1])
        if not np.all(np.isfinite(v)):
            raise CohortValidationError("exposures contain non-finite entries")
        if self.binary and not np.all((v == 0) | (v == 1)):
            bad = np.argwhere((v != 0) & (v != 1))[0]
            raise NonBinaryEntryError(
                f"binary exposure matrix has entry {v[tuple(bad)]!r} at row {bad[0]}, column {bad[1]}"
            )
        return self


@dataclass(frozen=True, eq=False)
class Cohort:
    """Exposures, outcomes and labels, with optional ground truth for synthetic data."""

    exposures: ExposureMatrix
    outcomes: np.ndarray
    cause_labels: tuple
    true_confounders: Optional[np.ndarray] = None
    true_effects: Optional[np.ndarray] = None

    def __post_init__(self):
        if not isinstance(self.exposures, ExposureMatrix):
            object.__setattr__(self, "exposures", ExposureMatrix(self.exposures))
        object.__setattr__(self, "outcomes", _frozen(self.outcomes))
        object.__setattr__(self, "cause_labels", tuple(str(c) for c in self.cause_labels))
        if self.true_confounders is not None:
            conf = _frozen(self.true_confounders)
            if conf.ndim == 1:
                conf = _frozen(conf[:, None])
            object.__setattr__(self, "true_confounders", conf)
        if self.true_effects is not None:
            object.__setattr__(self, "true_effects", _frozen(self.true_effects))

    @property
    def n_patients(self) -> int:
        return self.exposures.n_patients

    @property
    def n_causes(self) -> int:
        return self.exposures.n_causes

    def __eq__(self, other):
        if not isinstance(other, Cohort):
            return NotImplemented
        return (
            self.exposures == other.exposures
            and _optional_equal(self.outcomes, other.outcomes)
            and self.cause_labels == other.cause_labels
            and _optional_equal(self.true_confounders, other.true_confounders)
            and _optional_equal(self.true_effects, other.true_effects)
        )

    def select_causes(self, columns: Sequence[int]) -> "Cohort":
        """Return a cohort restricted to the given cause columns."""
        columns = list(columns)
        effects = None if self.true_effects is None else self.true_effects[columns]
        return Cohort(
            exposures=ExposureMatrix(self.exposures.values[:, columns], self.exposures.binary),
            outcomes=self.outcomes,
            cause_labels=[self.cause_labels[j] for j in columns],
            true_confounders=self.true_confounders,
            true_effects=effects,
        )


@dataclass(frozen=True, eq=False)
class SubstituteConfounder:
    """Posterior-mean latent representation of each patient."""

    values: np.ndarray
    source_model: str = field(default="PPCA")

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.source_model not in SOURCE_MODELS:
            raise ValueError(f"unknown source model {self.source_model!r}")
        if self.values.ndim != 2:
            raise DimensionMismatchError("substitute confounder", "2-d matrix", self.values.ndim)
        if not np.all(np.isfinite(self.values)):
            raise CohortValidationError("substitute confounder has non-finite entries")
        if self.source_model in ("PMF", "DEF") and not np.all(self.values > 0):
            raise CohortValidationError(f"{self.source_model} substitute confounder must be positive")

    @property
    def k_dim(self) -> int:
        return self.values.shape[1]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def validate_cohort(cohort: Cohort) -> Cohort:
    """Check every cohort invariant and return the cohort unchanged.

    Raises
    ------
    DimensionMismatchError
        A field disagrees with the exposure dimensions; ``err.field`` names it.
    NonBinaryEntryError
        The exposure matrix is flagged binary but holds other values.
    """
    cohort.exposures.validate()
    n, d = cohort.exposures.shape
    y = cohort.outcomes
    if y.ndim != 1 or y.shape[0] != n:
        raise DimensionMismatchError("outcomes", n, y.shape)
    if not np.all(np.isfinite(y)):
        raise CohortValidationError("outcomes contain missing or non-finite values")
    if len(cohort.cause_labels) != d:
        raise DimensionMismatchError("cause_labels", d, len(cohort.cause_labels))
    if len(set(cohort.cause_labels)) != d:
        raise CohortValidationError("cause labels must be unique")
    if cohort.true_effects is not None and cohort.true_effects.shape != (d,):
        raise DimensionMismatchError("true_effects", d, cohort.true_effects.shape)
    if cohort.true_confounders is not None and cohort.true_confounders.shape[0] != n:
        raise DimensionMismatchError("true_confounders", n, cohort.true_confounders.shape[0])
    return cohort


def as_array(a) -> np.ndarray:
    """Exposure values as a float array, accepting containers or raw arrays."""
    if isinstance(a, Cohort):
        a = a.exposures
    if isinstance(a, ExposureMatrix):
        return a.values
    return np.asarray(a, dtype=float)
