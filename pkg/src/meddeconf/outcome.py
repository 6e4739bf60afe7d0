"""Bayesian linear regression of the outcome on exposures and confounders.

The posterior is the exact Normal-Inverse-Gamma update::

    coef | s2 ~ N(0, s2 * Lambda0^-1),   s2 ~ InvGamma(a0, b0)
    y | coef, s2 ~ N(X coef, s2 I)

with ``X = [1 | A | Z]``. Each coefficient's marginal posterior is a Student-t
with ``2 * a_n`` degrees of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, stats

from .data import as_array
from .exceptions import DegenerateDataError, DimensionMismatchError

__all__ = [
    "RegressionPrior",
    "OutcomePosterior",
    "EffectReport",
    "fit_outcome",
    "effect_report",
    "design_matrix",
]

VAGUE_PRECISION = 1e-6


@dataclass(frozen=True)
class RegressionPrior:
    """Prior for the outcome regression.

    ``coef_precision`` applies to every cause and confounder coefficient.
    When left as ``None`` it resolves to 1.0, or to a vague ``1e-6`` when the
    regression has at most two causes.
    """

    coef_precision: Optional[float] = None
    intercept_precision: float = VAGUE_PRECISION
    noise_shape: float = 1e-3
    noise_rate: float = 1e-3

    def __post_init__(self):
        for name in ("intercept_precision", "noise_shape", "noise_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.coef_precision is not None and not self.coef_precision > 0:
            raise ValueError("coef_precision must be positive")

    def resolved_coef_precision(self, n_causes: int) -> float:
        if self.coef_precision is not None:
            return float(self.coef_precision)
        return VAGUE_PRECISION if n_causes <= 2 else 1.0


@dataclass(frozen=True, eq=False)
class OutcomePosterior:
    coef_mean: np.ndarray
    coef_scale_matrix: np.ndarray
    precision: np.ndarray
    noise_shape: float
    noise_rate: float
    column_roles: tuple
    column_labels: tuple

    @property
    def degrees_of_freedom(self) -> float:
        return 2.0 * self.noise_shape

    @property
    def cause_index(self) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.column_roles) if r == "cause"], dtype=int)

    @property
    def cause_labels(self) -> tuple:
        return tuple(self.column_labels[i] for i in self.cause_index)

    def marginal(self, j: int):
        """Student-t marginal of coefficient ``j`` (column index in the design)."""
        scale = np.sqrt(self.coef_scale_matrix[j, j])
        return stats.t(df=self.degrees_of_freedom, loc=self.coef_mean[j], scale=scale)

    def noise_var_mean(self) -> float:
        if self.noise_shape <= 1:
            return np.inf
        return self.noise_rate / (self.noise_shape - 1.0)


def design_matrix(A, z=None) -> np.ndarray:
    a = as_array(A)
    if a.ndim == 1:
        a = a[:, None]
    cols = [np.ones((a.shape[0], 1)), a]
    if z is not None:
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if z.shape[0] != a.shape[0]:
            raise DimensionMismatchError("confounders", a.shape[0], z.shape[0])
        cols.append(z)
    return np.hstack(cols)


def fit_outcome(
    y,
    A,
    z=None,
    prior: Optional[RegressionPrior] = None,
    cause_labels: Optional[Sequence[str]] = None,
) -> OutcomePosterior:
    """Exact conjugate posterior of the outcome regression.

    Parameters
    ----------
    y : array-like, shape (N,)
    A : ExposureMatrix or array-like, shape (N, D)
    z : array-like, shape (N, K), optional
        Substitute confounder, true confounders (oracle), or None
        (unadjusted).
    prior : RegressionPrior, optional
    cause_labels : sequence of str, optional

    Raises
    ------
    DegenerateDataError
        The posterior precision is singular.
    """
    if prior is None:
        prior = RegressionPrior()
    y = np.asarray(y, dtype=float)
    if hasattr(z, "values") and not isinstance(z, np.ndarray):
        z = z.values
    X = design_matrix(A, z)
    n, p = X.shape
    if y.shape != (n,):
        raise DimensionMismatchError("outcomes", n, y.shape)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("design matrix and outcomes must be finite")
    d = as_array(A).reshape(n, -1).shape[1]
    k = p - 1 - d

    prior_prec = np.concatenate(
        [[prior.intercept_precision], np.full(d + k, prior.resolved_coef_precision(d))]
    )
    precision = X.T @ X + np.diag(prior_prec)
    try:
        factor = linalg.cho_factor(precision, lower=True)
    except linalg.LinAlgError as exc:
        raise DegenerateDataError("singular normal equations") from exc
    xty = X.T @ y
    mean = linalg.cho_solve(factor, xty)
    cov_unscaled = linalg.cho_solve(factor, np.eye(p))
    cov_unscaled = 0.5 * (cov_unscaled + cov_unscaled.T)

    a_n = prior.noise_shape + 0.5 * n
    resid = float(y @ y - mean @ precision @ mean)
    b_n = prior.noise_rate + 0.5 * max(resid, 0.0)

    if cause_labels is None:
        width = len(str(d))
        cause_labels = [f"cause{j + 1:0{width}d}" for j in range(d)]
    if len(cause_labels) != d:
        raise DimensionMismatchError("cause_labels", d, len(cause_labels))
    roles = ("intercept",) + ("cause",) * d + ("confounder",) * k
    labels = ("(intercept)",) + tuple(cause_labels) + tuple(f"confounder{j + 1}" for j in range(k))
    return OutcomePosterior(
        coef_mean=mean,
        coef_scale_matrix=(b_n / a_n) * cov_unscaled,
        precision=precision,
        noise_shape=a_n,
        noise_rate=b_n,
        column_roles=roles,
        column_labels=labels,
    )


@dataclass(frozen=True, eq=False)
class EffectReport:
    """Per-cause posterior summaries.

    ``lower[l, j]`` and ``upper[l, j]`` bound the central credible interval
    at ``levels[l]`` for cause ``j``. A cause is flagged causal when its
    widest interval excludes zero.
    """

    labels: tuple
    mean: np.ndarray
    std_err: np.ndarray
    levels: tuple
    lower: np.ndarray
    upper: np.ndarray
    tail_prob: np.ndarray

    def __len__(self):
        return len(self.labels)

    def interval(self, level: float) -> np.ndarray:
        i = self.levels.index(level)
        return np.column_stack([self.lower[i], self.upper[i]])

    @property
    def ci80(self):
        return self.interval(0.8)

    @property
    def ci95(self):
        return self.interval(0.95)

    @property
    def causal(self) -> np.ndarray:
        widest = int(np.argmax(self.levels))
        return (self.lower[widest] > 0) | (self.upper[widest] < 0)

    def rows(self):
        """Dicts keyed like the TSV columns, one per cause."""
        out = []
        for j, label in enumerate(self.labels):
            row = {"label": label, "mean": float(self.mean[j]), "std_err": float(self.std_err[j])}
            for i, lev in enumerate(self.levels):
                tag = f"ci{int(round(lev * 100))}"
                row[f"{tag}_lo"] = float(self.lower[i, j])
                row[f"{tag}_hi"] = float(self.upper[i, j])
            row["tail_prob"] = float(self.tail_prob[j])
            row["causal"] = bool(self.causal[j])
            out.append(row)
        return out


def effect_report(post: OutcomePosterior, levels=(0.8, 0.95)) -> EffectReport:
    """Means, standard errors, credible intervals and two-sided tail probabilities.

    ``tail_prob = 2 * min(P(coef <= 0), P(coef >= 0))`` under the Student-t
    marginal.
    """
    levels = tuple(float(l) for l in sorted(levels))
    if not all(0 < l < 1 for l in levels):
        raise ValueError("credible levels must lie in (0, 1)")
    idx = post.cause_index
    nu = post.degrees_of_freedom
    loc = post.coef_mean[idx]
    scale = np.sqrt(np.diag(post.coef_scale_matrix)[idx])
    std_err = scale * np.sqrt(nu / (nu - 2.0)) if nu > 2 else np.full_like(scale, np.inf)
    lower = np.empty((len(levels), idx.size))
    upper = np.empty_like(lower)
    for i, lev in enumerate(levels):
        q = stats.t.ppf(0.5 + lev / 2.0, df=nu)
        lower[i] = loc - q * scale
        upper[i] = loc + q * scale
    lower_tail = stats.t.cdf(-loc / scale, df=nu)
    tail = np.minimum(1.0, 2.0 * np.minimum(lower_tail, 1.0 - lower_tail))
    return EffectReport(
        labels=post.cause_labels,
        mean=loc,
        std_err=std_err,
        levels=levels,
        lower=lower,
        upper=upper,
        tail_prob=tail,
    )
