"""Synthetic cohorts with a known confounding structure.

Two designs are provided:

* ``simulate_two_med``: one Gaussian confounder driving two continuous
  exposures and the outcome.
* ``simulate_multi_med``: a multi-dimensional Gaussian confounder driving
  binary exposures through a logistic link, with a sparse set of causal
  exposures.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import Cohort, ExposureMatrix
from .exceptions import ConfigurationError

__all__ = [
    "Setup",
    "TwoMedConfig",
    "MultiMedConfig",
    "simulate_two_med",
    "simulate_multi_med",
]


class Setup(str, enum.Enum):
    NO_CAUSE = "NoCause"
    ONE_CAUSE = "OneCause"


@dataclass(frozen=True)
class TwoMedConfig:
    n_patients: int = 1000
    setup: Setup = Setup.NO_CAUSE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "setup", Setup(self.setup))
        if self.n_patients < 2:
            raise ConfigurationError("n_patients must be at least 2")


@dataclass(frozen=True)
class MultiMedConfig:
    n_patients: int = 5000
    n_causes: int = 50
    k_confounder: int = 10
    sparsity: float = 0.8
    seed: int = 0
    loading_scale: float = 0.5
    effect_scale: float = 0.25
    confounder_effect_scale: float = 0.25

    def __post_init__(self):
        if not 0.0 <= self.sparsity <= 1.0:
            raise ConfigurationError("sparsity must lie in [0, 1]")
        if self.k_confounder < 1:
            raise ConfigurationError("k_confounder must be at least 1")
        if self.n_causes < 2:
            raise ConfigurationError("n_causes must be at least 2")
        if self.n_patients < 1:
            raise ConfigurationError("n_patients must be at least 1")


def simulate_two_med(config: TwoMedConfig) -> Cohort:
    """Two continuous exposures sharing one confounder.

    Each of the two exposures and the outcome receives its own independent
    standard-normal noise. Under ``Setup.ONE_CAUSE`` the second exposure
    has a true effect of 0.3; otherwise neither exposure is causal.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_patients
    c = rng.standard_normal(n)
    noise = rng.standard_normal((n, 3))
    a = np.column_stack([0.3 * c + noise[:, 0], 0.4 * c + noise[:, 1]])
    effects = np.array([0.0, 0.3 if config.setup is Setup.ONE_CAUSE else 0.0])
    y = 0.5 * c + a @ effects + noise[:, 2]
    return Cohort(
        exposures=ExposureMatrix(a, binary=False),
        outcomes=y,
        cause_labels=("med1", "med2"),
        true_confounders=c[:, None],
        true_effects=effects,
    )


def simulate_multi_med(config: MultiMedConfig) -> Cohort:
    """Binary exposures from a logistic factor model plus a sparse linear outcome.

    Loadings, effects and confounder coefficients are redrawn from their
    priors for every seed. Exactly ``round(sparsity * n_causes)`` effects are
    zeroed, chosen uniformly at random.
    """
    rng = np.random.default_rng(config.seed)
    n, d, k = config.n_patients, config.n_causes, config.k_confounder
    c = rng.standard_normal((n, k))
    loadings = rng.normal(0.0, config.loading_scale, size=(k, d))
    a = (rng.random((n, d)) < expit(c @ loadings)).astype(float)

    beta = rng.normal(0.0, config.effect_scale, size=d)
    n_zero = int(round(config.sparsity * d))
    beta[rng.permutation(d)[:n_zero]] = 0.0
    gamma = rng.normal(0.0, config.confounder_effect_scale, size=k)
    y = a @ beta + c @ gamma + rng.standard_normal(n)

    width = len(str(d))
    labels = tuple(f"med{j + 1:0{width}d}" for j in range(d))
    return Cohort(
        exposures=ExposureMatrix(a, binary=True),
        outcomes=y,
        cause_labels=labels,
        true_confounders=c,
        true_effects=beta,
    )
