"""Per-patient held-out entries for predictive checking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["HoldoutMask", "make_holdout_mask", "observed_matrix"]


@dataclass(frozen=True, eq=False)
class HoldoutMask:
    """Held-out column indices per patient.

    ``columns[i]`` lists the held-out causes for patient ``i``; every patient
    holds out the same number of entries.
    """

    columns: np.ndarray
    n_causes: int
    holdout_fraction: float = 0.2

    def __post_init__(self):
        cols = np.array(self.columns, dtype=np.int64, copy=True)
        if cols.ndim != 2:
            raise ValueError("columns must be a 2-d integer array")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_causes):
            raise IndexError("held-out column index out of range")
        if cols.shape[1] >= self.n_causes:
            raise ValueError("each patient must retain at least one observed entry")
        srt = np.sort(cols, axis=1)
        if cols.shape[1] > 1 and np.any(srt[:, 1:] == srt[:, :-1]):
            raise ValueError("held-out indices must be unique per patient")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @property
    def n_patients(self) -> int:
        return self.columns.shape[0]

    @property
    def shape(self):
        return (self.n_patients, self.n_causes)

    def heldout(self) -> np.ndarray:
        """Boolean (N, D) matrix, True where an entry is held out."""
        out = np.zeros(self.shape, dtype=bool)
        out[np.arange(self.n_patients)[:, None], self.columns] = True
        return out

    def observed(self) -> np.ndarray:
        return ~self.heldout()

    def indices(self):
        """Row and column index arrays of the held-out entries, row-major."""
        rows = np.repeat(np.arange(self.n_patients), self.columns.shape[1])
        cols = np.sort(self.columns, axis=1).ravel()
        return rows, cols

    def __eq__(self, other):
        if not isinstance(other, HoldoutMask):
            return NotImplemented
        return (
            self.n_causes == other.n_causes
            and self.holdout_fraction == other.holdout_fraction
            and np.array_equal(self.columns, other.columns)
        )


def make_holdout_mask(n: int, d: int, fraction: float = 0.2, seed=None) -> HoldoutMask:
    """Hold out ``round(fraction * d)`` distinct columns per patient.

    The count is clipped to ``[1, d - 1]`` so something is always held out
    and every patient keeps at least one observed entry.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"holdout fraction must lie strictly between 0 and 1, got {fraction}")
    if d < 2:
        raise ValueError("need at least two causes to hold out entries")
    h = min(max(int(round(fraction * d)), 1), d - 1)
    rng = np.random.default_rng(seed)
    # argsort of iid uniforms is a uniform random permutation per row
    cols = np.argsort(rng.random((n, d)), axis=1)[:, :h]
    return HoldoutMask(np.sort(cols, axis=1), d, fraction)


def observed_matrix(mask, shape) -> np.ndarray:
    """Boolean observed-entry matrix from a mask, a boolean array, or None."""
    if mask is None:
        return np.ones(shape, dtype=bool)
    if isinstance(mask, HoldoutMask):
        if mask.shape != tuple(shape):
            raise ValueError(f"mask shape {mask.shape} does not match data shape {tuple(shape)}")
        return mask.observed()
    obs = np.asarray(mask, dtype=bool)
    if obs.shape != tuple(shape):
        raise ValueError(f"mask shape {obs.shape} does not match data shape {tuple(shape)}")
    return obs
