"""Probabilistic factor models for the exposure matrix.

Three models are available: Gaussian PPCA, Poisson matrix factorization and a
two-layer Gamma deep exponential family. Each fit exposes its posterior over
per-patient latents, from which substitute confounders and posterior
predictive replicates are drawn.
"""

from ..data import SubstituteConfounder
from ._base import FactorFit
from .deep import DefFit, def_elbo_and_grad, fit_def
from .io import load_fit, save_fit
from .pmf import PmfFit, fit_pmf, pmf_elbo
from .ppca import PpcaFit, fit_ppca, ppca_posterior

__all__ = [
    "FactorFit",
    "PpcaFit",
    "PmfFit",
    "DefFit",
    "fit_ppca",
    "fit_pmf",
    "fit_def",
    "fit_factor_model",
    "def_elbo_and_grad",
    "pmf_elbo",
    "ppca_posterior",
    "substitute_confounder",
    "posterior_predictive_samples",
    "save_fit",
    "load_fit",
]


def substitute_confounder(fit: FactorFit, include_upper: bool = False) -> SubstituteConfounder:
    """Posterior mean of each patient's latent variables.

    For the DEF, ``include_upper=True`` appends the second-layer latents to
    the first-layer ones.
    """
    if include_upper:
        if not isinstance(fit, DefFit):
            raise ValueError("include_upper only applies to DEF fits")
        return fit.substitute(include_upper=True)
    return fit.substitute()


def posterior_predictive_samples(fit: FactorFit, mask, n_rep: int = 100, seed=None):
    """Replicated held-out entries, shape ``(n_rep, n_heldout)``."""
    return fit.posterior_predictive_samples(mask, n_rep=n_rep, seed=seed)


def fit_factor_model(model: str, A, k=None, layer_sizes=(30, 4), alpha=0.3, beta=0.3, seed=None, mask=None, **options):
    """Dispatch to ``fit_ppca``, ``fit_pmf`` or ``fit_def`` by name."""
    model = model.upper()
    if model == "PPCA":
        return fit_ppca(A, k if k is not None else 1, seed=seed, mask=mask, **options)
    if model == "PMF":
        return fit_pmf(A, k if k is not None else 30, alpha=alpha, beta=beta, seed=seed, mask=mask, **options)
    if model == "DEF":
        return fit_def(A, layer_sizes, alpha=alpha, beta=beta, seed=seed, mask=mask, **options)
    raise ValueError(f"unknown factor model {model!r}")
