"""Deconfounded estimation of per-cause treatment effects from multi-cause exposure data.

The workflow: fit a probabilistic factor model to the exposure matrix, check
it on held-out entries, take the posterior mean of each patient's latent
factors as a substitute confounder, and regress the outcome on exposures plus
that substitute with a conjugate Bayesian linear model.
"""

__version__ = "0.1.0"

from .data import Cohort, ExposureMatrix, SubstituteConfounder, validate_cohort
from .exceptions import (
    CheckFailedError,
    CohortValidationError,
    ConfigurationError,
    DeconfounderError,
    DegenerateDataError,
    DimensionMismatchError,
    DivergenceError,
    IngestError,
    InvalidHyperparameterError,
    NonBinaryEntryError,
)
from .experiment import ExperimentConfig, ExperimentReport, emit_report, run_experiment
from .factor_models import (
    fit_def,
    fit_factor_model,
    fit_pmf,
    fit_ppca,
    load_fit,
    posterior_predictive_samples,
    save_fit,
    substitute_confounder,
)
from .holdout import HoldoutMask, make_holdout_mask
from .ingest import CohortFiles, filter_rare_causes, load_cohort, save_cohort
from .metrics import EvalSummary, coverage, rmse
from .outcome import EffectReport, OutcomePosterior, RegressionPrior, effect_report, fit_outcome
from .predictive_check import CheckResult, Verdict, predictive_score
from .simulation import MultiMedConfig, Setup, TwoMedConfig, simulate_multi_med, simulate_two_med
