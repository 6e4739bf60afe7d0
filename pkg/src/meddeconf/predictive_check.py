"""Held-out posterior predictive check for factor models.

The test statistic for a set of held-out values ``x`` is the posterior
expected log-likelihood ``E_z[log p(x | z, theta_hat) | observed]``,
estimated with ``n_post`` posterior draws of the latents. Replicated
held-out values are drawn from the posterior predictive, and the score is
the probability that a replicate's statistic falls below the observed one.

By default the statistic is computed per patient and the score averages the
per-patient comparisons over patients and replicates (``statistic="patient"``).
``statistic="total"`` compares the single statistic summed over all held-out
entries instead.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .data import as_array
from .holdout import HoldoutMask, make_holdout_mask

__all__ = [
    "HoldoutMask",
    "make_holdout_mask",
    "Verdict",
    "CheckResult",
    "heldout_loglik",
    "heldout_loglik_draws",
    "predictive_score",
    "score_from_stats",
    "DEFAULT_BAND",
    "SOFT_BAND",
]

DEFAULT_BAND = (0.05, 0.95)
SOFT_BAND = (0.2, 0.8)


class Verdict(str, enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"


@dataclass(frozen=True, eq=False)
class CheckResult:
    score: float
    observed_stat: float
    replicated_stats: np.ndarray
    verdict: Verdict
    band: tuple = DEFAULT_BAND
    statistic: str = "patient"
    observed_by_patient: np.ndarray = field(default=None, repr=False)
    replicated_by_patient: np.ndarray = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def to_dict(self):
        return {
            "score": self.score,
            "verdict": self.verdict.value,
            "band": list(self.band),
            "statistic": self.statistic,
            "observed_stat": self.observed_stat,
            "replicated_stats": [float(x) for x in self.replicated_stats],
        }

    def __eq__(self, other):
        if not isinstance(other, CheckResult):
            return NotImplemented
        return (
            self.score == other.score
            and self.observed_stat == other.observed_stat
            and np.array_equal(self.replicated_stats, other.replicated_stats)
            and self.verdict == other.verdict
            and tuple(self.band) == tuple(other.band)
            and self.statistic == other.statistic
        )


def score_from_stats(observed, replicated) -> float:
    """Fraction of replicated statistics strictly below the observed ones.

    ``observed`` has shape ``(m,)`` (or is a scalar) and ``replicated`` shape
    ``(n_rep, m)`` (or ``(n_rep,)``). Ties count one half.
    """
    observed = np.asarray(observed, dtype=float)
    replicated = np.asarray(replicated, dtype=float)
    if replicated.shape[0] == 0:
        raise ValueError("at least one replicate is required")
    below = (replicated < observed).mean()
    ties = (replicated == observed).mean()
    return float(below + 0.5 * ties)


class _HeldoutStatistic:
    """Posterior expected held-out log-likelihood as a function of the held-out values.

    For a Poisson likelihood the expectation is ``x * E[log mu] - E[mu] - log x!``
    and for a Gaussian one ``-(x^2 - 2 x E[mu] + E[mu^2]) / (2 s2) - log(2 pi s2) / 2``,
    so two moments per entry summarise all ``n_post`` draws.
    """

    def __init__(self, fit, mask: HoldoutMask, n_post: int, rng, observed_values=None):
        if n_post < 1:
            raise ValueError("n_post must be at least 1")
        self.fit = fit
        self.rows, self.cols = mask.indices()
        self.per_patient = self.rows.size // mask.n_patients
        m1 = np.zeros(self.rows.size)
        m2 = np.zeros(self.rows.size)
        draws = []
        for _ in range(n_post):
            mu = fit.entry_means(fit.sample_latent(rng), self.rows, self.cols)
            if fit.family == "poisson":
                with np.errstate(divide="ignore"):
                    m1 += np.log(mu)
                m2 += mu
            else:
                m1 += mu
                m2 += mu * mu
            if observed_values is not None:
                if fit.family == "poisson":
                    with np.errstate(divide="ignore"):
                        ll = self._loglik(observed_values, np.log(mu), mu)
                else:
                    ll = self._loglik(observed_values, mu, mu * mu)
                draws.append(ll.sum())
        self.m1 = m1 / n_post
        self.m2 = m2 / n_post
        self.draws = np.array(draws)

    def _loglik(self, x, m1, m2):
        if self.fit.family == "poisson":
            # x log mu is 0 at x = 0 even when mu underflows
            with np.errstate(invalid="ignore"):
                xlog = np.where(x > 0, x * m1, 0.0)
            return xlog - m2 - gammaln(x + 1.0)
        s2 = self.fit.noise_var
        return -0.5 * np.log(2 * np.pi * s2) - (x * x - 2.0 * x * m1 + m2) / (2.0 * s2)

    def entries(self, x):
        return self._loglik(x, self.m1, self.m2)

    def by_patient(self, x):
        return self.entries(x).reshape(-1, self.per_patient).sum(axis=1)


def _heldout_values(A, mask):
    a = as_array(A)
    rows, cols = mask.indices()
    return a[rows, cols]


def heldout_loglik_draws(fit, A, mask: HoldoutMask, n_post: int = 100, seed=None) -> np.ndarray:
    """Held-out log-likelihood under each of ``n_post`` posterior draws."""
    x = _heldout_values(A, mask)
    stat = _HeldoutStatistic(fit, mask, n_post, np.random.default_rng(seed), observed_values=x)
    return stat.draws


def heldout_loglik(fit, A, mask: HoldoutMask, n_post: int = 100, seed=None) -> float:
    """Monte Carlo estimate of the posterior expected held-out log-likelihood.

    ``fit`` should have been trained with ``mask`` applied.
    """
    return float(heldout_loglik_draws(fit, A, mask, n_post, seed).mean())


def _child_rng(seed, *key):
    entropy = np.random.SeedSequence(seed).entropy
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=key))


def predictive_score(
    fit,
    A,
    mask: HoldoutMask,
    n_rep: int = 100,
    n_post: int = 100,
    seed=None,
    band=DEFAULT_BAND,
    statistic: str = "patient",
) -> CheckResult:
    """Run the held-out predictive check.

    Parameters
    ----------
    fit : fitted factor model trained with ``mask`` applied
    A : exposure matrix (full, including held-out values)
    mask : HoldoutMask
    n_rep : int
        Number of replicated held-out datasets.
    n_post : int
        Posterior draws used to evaluate the test statistic.
    band : (float, float)
        The check passes when ``band[0] <= score <= band[1]``.
    statistic : {"patient", "total"}

    Returns
    -------
    CheckResult
    """
    if n_rep < 1:
        raise ValueError("at least one replicate is required (n_rep >= 1)")
    if statistic not in ("patient", "total"):
        raise ValueError(f"unknown statistic {statistic!r}")
    if seed is None:
        seed = np.random.SeedSequence().entropy
    x_obs = _heldout_values(A, mask)
    stat = _HeldoutStatistic(fit, mask, n_post, _child_rng(seed, 0))
    t_obs = stat.by_patient(x_obs)

    rows, cols = stat.rows, stat.cols
    t_rep = np.empty((n_rep, t_obs.size))
    for r in range(n_rep):
        rng = _child_rng(seed, 1, r)
        z = fit.sample_latent(rng)
        x_rep = fit.sample_entries(fit.entry_means(z, rows, cols), rng)
        t_rep[r] = stat.by_patient(x_rep)

    total_obs = float(t_obs.sum())
    total_rep = t_rep.sum(axis=1)
    if statistic == "patient":
        score = score_from_stats(t_obs, t_rep)
    else:
        score = score_from_stats(total_obs, total_rep)
    lo, hi = band
    verdict = Verdict.PASS if lo <= score <= hi else Verdict.FAIL
    if verdict is Verdict.PASS and not SOFT_BAND[0] <= score <= SOFT_BAND[1]:
        warnings.warn(f"predictive score {score:.3f} passes but lies outside {SOFT_BAND}", RuntimeWarning, stacklevel=2)
    return CheckResult(
        score=score,
        observed_stat=total_obs,
        replicated_stats=total_rep,
        verdict=verdict,
        band=tuple(band),
        statistic=statistic,
        observed_by_patient=t_obs,
        replicated_by_patient=t_rep,
    )
