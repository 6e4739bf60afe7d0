"""Accuracy of effect estimates against known truth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = ["EvalSummary", "rmse", "coverage", "coverage_counts"]


@dataclass(frozen=True)
class EvalSummary:
    rmse: float
    coverage_all: float
    coverage_causal: Optional[float]
    coverage_noncausal: Optional[float]


def rmse(est, truth) -> float:
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape or est.ndim != 1:
        raise ValueError(f"length mismatch: {est.shape} vs {truth.shape}")
    if est.size == 0:
        raise ValueError("need at least one effect")
    return float(np.sqrt(np.mean((est - truth) ** 2)))


def _percent(hits):
    return float(100.0 * hits.mean()) if hits.size else None


def coverage_counts(intervals, truth, causal_mask=None):
    """Coverage percentages ``(all, causal, noncausal)`` for ``(D, 2)`` intervals.

    ``causal_mask`` defaults to ``truth != 0``. Empty strata give ``None``.
    """
    intervals = np.asarray(intervals, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if intervals.shape != (truth.size, 2):
        raise ValueError(f"length mismatch: {intervals.shape[0]} intervals vs {truth.size} truths")
    if causal_mask is None:
        causal_mask = truth != 0
    causal_mask = np.asarray(causal_mask, dtype=bool)
    if causal_mask.shape != truth.shape:
        raise ValueError("causal mask length does not match truth")
    hits = (intervals[:, 0] <= truth) & (truth <= intervals[:, 1])
    return _percent(hits), _percent(hits[causal_mask]), _percent(hits[~causal_mask])


def coverage(report, truth, causal_mask=None) -> EvalSummary:
    """RMSE of the posterior means and 95% interval coverage of the truth.

    ``report`` is an ``EffectReport``. Coverage is split by ``causal_mask``
    (default ``truth != 0``).
    """
    cov_all, cov_c, cov_n = coverage_counts(report.ci95, truth, causal_mask)
    return EvalSummary(rmse(report.mean, truth), cov_all, cov_c, cov_n)
