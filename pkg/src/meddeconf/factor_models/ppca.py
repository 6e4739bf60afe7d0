"""Probabilistic PCA fitted by expectation maximization.

Model, with a standard-normal prior on the latents::

    z_i ~ N(0, I_K)
    a_ij | z_i ~ N(z_i . theta_j, sigma^2)

Held-out entries are dropped from the likelihood, so every patient gets its
own Gaussian posterior over ``z_i`` computed from the entries it kept.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..data import as_array
from ..exceptions import DegenerateDataError
from ..holdout import observed_matrix
from ._base import FactorFit

__all__ = ["PpcaFit", "fit_ppca", "ppca_posterior"]

LOG_2PI = np.log(2 * np.pi)


@dataclass(eq=False)
class PpcaFit(FactorFit):
    """Fitted PPCA.

    Attributes
    ----------
    loadings : ndarray, shape (K, D)
    noise_var : float
    z_post_mean : ndarray, shape (N, K)
    z_post_cov : ndarray, shape (N, K, K)
        Per-patient posterior covariance. Identical across patients when no
        entries are held out.
    """

    loadings: np.ndarray
    noise_var: float
    z_post_mean: np.ndarray
    z_post_cov: np.ndarray
    prior_scale: float = 1.0
    loglik_trace: list = field(default_factory=list)
    converged: bool = True

    family = "gaussian"
    source_model = "PPCA"

    @property
    def n_patients(self):
        return self.z_post_mean.shape[0]

    @property
    def n_causes(self):
        return self.loadings.shape[1]

    @property
    def k(self):
        return self.loadings.shape[0]

    @property
    def loglik(self):
        return self.loglik_trace[-1] if self.loglik_trace else np.nan

    def posterior_mean_latent(self):
        return self.z_post_mean

    def sample_latent(self, rng):
        chol = np.linalg.cholesky(self.z_post_cov)
        eps = rng.standard_normal(self.z_post_mean.shape)
        return self.z_post_mean + np.einsum("nkl,nl->nk", chol, eps)

    def entry_means(self, latent, rows, cols):
        return np.einsum("nk,kn->n", latent[rows], self.loadings[:, cols])

    def reconstruction(self):
        return self.z_post_mean @ self.loadings


def ppca_posterior(a, observed, loadings, noise_var):
    """Posterior mean, covariance and log marginal likelihood per patient.

    Uses the Woodbury identity so the cost is O(N D K^2) rather than O(N D^3).
    """
    w = observed.astype(float)
    k = loadings.shape[0]
    precision = np.eye(k) + np.einsum("nd,kd,ld->nkl", w, loadings, loadings) / noise_var
    cov = np.linalg.inv(precision)
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    proj = (w * a) @ loadings.T
    mean = np.einsum("nkl,nl->nk", cov, proj) / noise_var

    n_obs = w.sum(axis=1)
    _, logdet = np.linalg.slogdet(precision)
    quad = (w * a * a).sum(axis=1) / noise_var - np.einsum("nk,nk->n", proj, mean) / noise_var
    loglik = -0.5 * (n_obs * (LOG_2PI + np.log(noise_var)) + logdet + quad)
    return mean, cov, loglik


def _closed_form_init(a, observed, k, rng, floor):
    # column-mean fill for missing entries; exact ML when nothing is missing
    filled = np.where(observed, a, 0.0)
    counts = np.maximum(observed.sum(axis=0), 1)
    col_mean = filled.sum(axis=0) / counts
    filled = np.where(observed, a, col_mean)
    n, d = a.shape
    evals, evecs = np.linalg.eigh(filled.T @ filled / n)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    noise_var = max(evals[k:].mean() if k < d else 0.0, floor)
    scale = np.sqrt(np.maximum(evals[:k] - noise_var, 0.0))
    loadings = (evecs[:, :k] * scale).T
    # small perturbation keeps EM off the zero-loading fixed point
    loadings = loadings + 1e-6 * np.sqrt(max(evals.mean(), floor)) * rng.standard_normal(loadings.shape)
    return loadings, noise_var


def fit_ppca(A, k: int, seed=None, mask=None, max_iter: int = 500, tol: float = 1e-8) -> PpcaFit:
    """Fit PPCA by EM on the observed entries of ``A``.

    Parameters
    ----------
    A : ExposureMatrix or array-like, shape (N, D)
    k : int
        Latent dimension, ``1 <= k <= D``.
    seed : int, optional
    mask : HoldoutMask or bool array, optional
        Entries held out of the likelihood. A boolean array marks *observed*
        entries.
    max_iter, tol :
        EM stops once the relative change in log-likelihood drops below
        ``tol`` or after ``max_iter`` iterations.

    Warns
    -----
    RuntimeWarning
        When EM stops at ``max_iter`` without meeting ``tol``.
    """
    a = np.array(as_array(A), dtype=float)
    n, d = a.shape
    if not 1 <= k <= d:
        raise ValueError(f"k must satisfy 1 <= k <= D={d}, got {k}")
    observed = observed_matrix(mask, a.shape)
    if k == d:
        lo = np.where(observed, a, np.inf).min(axis=0)
        hi = np.where(observed, a, -np.inf).max(axis=0)
        if np.any(lo == hi):
            raise DegenerateDataError("a column of A is constant; cannot fit k = D")

    rng = np.random.default_rng(seed)
    w = observed.astype(float)
    n_obs_total = w.sum()
    scale2 = (w * a * a).sum() / n_obs_total
    floor = 1e-10 * max(scale2, 1e-300)
    loadings, noise_var = _closed_form_init(a, observed, k, rng, floor)

    trace = []
    converged = False
    for _ in range(max_iter):
        mean, cov, ll = ppca_posterior(a, observed, loadings, noise_var)
        trace.append(float(ll.sum()))
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= tol * abs(trace[-2]):
            converged = True
            break

        ezz = cov + np.einsum("nk,nl->nkl", mean, mean)
        lhs = np.einsum("nd,nkl->dkl", w, ezz)
        rhs = (w * a).T @ mean
        loadings = np.linalg.solve(lhs, rhs[:, :, None])[:, :, 0].T
        resid = (
            (w * a * a).sum()
            - 2.0 * np.einsum("nd,nk,kd->", w * a, mean, loadings)
            + np.einsum("nd,kd,nkl,ld->", w, loadings, ezz, loadings)
        )
        noise_var = max(resid / n_obs_total, floor)

    mean, cov, ll = ppca_posterior(a, observed, loadings, noise_var)
    if not converged:
        trace.append(float(ll.sum()))
        warnings.warn(
            f"PPCA EM did not converge within {max_iter} iterations", RuntimeWarning, stacklevel=2
        )
    return PpcaFit(
        loadings=loadings,
        noise_var=float(noise_var),
        z_post_mean=mean,
        z_post_cov=cov,
        loglik_trace=trace,
        converged=converged,
    )
