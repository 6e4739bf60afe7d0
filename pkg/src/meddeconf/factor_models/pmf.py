"""Poisson matrix factorization with Gamma priors, fitted by CAVI.

Model::

    z_ik ~ Gamma(alpha, beta)          (shape, rate)
    theta_jk ~ Gamma(alpha, beta)
    a_ij | z_i, theta_j ~ Poisson(z_i . theta_j)

Inference uses the auxiliary-count augmentation: each count splits over the
K components with multinomial allocations, which makes every complete
conditional Gamma. The allocations are never materialised; only their
sufficient statistics ``exp(E log z) * ((a / S) @ exp(E log theta))`` are.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln

from ..data import as_array
from ..exceptions import InvalidHyperparameterError
from ..holdout import observed_matrix
from ._base import FactorFit

__all__ = ["PmfFit", "fit_pmf", "pmf_elbo"]


@dataclass(eq=False)
class PmfFit(FactorFit):
    z_shape: np.ndarray
    z_rate: np.ndarray
    theta_shape: np.ndarray
    theta_rate: np.ndarray
    hyper_alpha: float = 0.3
    hyper_beta: float = 0.3
    elbo_trace: list = field(default_factory=list)
    converged: bool = True

    family = "poisson"
    source_model = "PMF"

    @property
    def n_patients(self):
        return self.z_shape.shape[0]

    @property
    def n_causes(self):
        return self.theta_shape.shape[0]

    @property
    def k(self):
        return self.z_shape.shape[1]

    @property
    def theta_mean(self):
        return self.theta_shape / self.theta_rate

    def posterior_mean_latent(self):
        return self.z_shape / self.z_rate

    def sample_latent(self, rng):
        return rng.gamma(self.z_shape, 1.0 / self.z_rate)

    def entry_means(self, latent, rows, cols):
        return np.einsum("nk,nk->n", latent[rows], self.theta_mean[cols])

    def rate_mean(self):
        """Posterior mean Poisson rate for every entry, ``E[z] E[theta]^T``."""
        return self.posterior_mean_latent() @ self.theta_mean.T


def _gamma_prior_minus_entropy(shape, rate, alpha, beta):
    """E_q[log Gamma(x; alpha, beta)] + H[q] summed over entries."""
    e_x = shape / rate
    e_log = digamma(shape) - np.log(rate)
    log_prior = alpha * np.log(beta) - gammaln(alpha) + (alpha - 1.0) * e_log - beta * e_x
    entropy = shape - np.log(rate) + gammaln(shape) + (1.0 - shape) * digamma(shape)
    return float(np.sum(log_prior + entropy))


def pmf_elbo(a, observed, z_shape, z_rate, theta_shape, theta_rate, alpha, beta):
    """ELBO with the auxiliary allocations at their optimum.

    The data term is ``a log sum_k exp(E log z_ik + E log theta_jk) - E[z_i . theta_j]
    - log a!`` over observed entries.
    """
    w = observed.astype(float)
    ez, et = z_shape / z_rate, theta_shape / theta_rate
    gz = np.exp(digamma(z_shape) - np.log(z_rate))
    gt = np.exp(digamma(theta_shape) - np.log(theta_rate))
    s = gz @ gt.T
    nz = (a > 0) & observed
    data = np.sum(a[nz] * np.log(s[nz])) - np.sum(w * (ez @ et.T)) - np.sum(w * gammaln(a + 1.0))
    return (
        data
        + _gamma_prior_minus_entropy(z_shape, z_rate, alpha, beta)
        + _gamma_prior_minus_entropy(theta_shape, theta_rate, alpha, beta)
    )


def _allocation_stats(a_obs, gz, gt):
    """Sums of auxiliary allocations over causes (for z) and patients (for theta)."""
    s = gz @ gt.T
    ratio = np.divide(a_obs, s, out=np.zeros_like(a_obs), where=a_obs > 0)
    return gz * (ratio @ gt), gt * (ratio.T @ gz)


def fit_pmf(
    A,
    k: int,
    alpha: float = 0.3,
    beta: float = 0.3,
    seed=None,
    mask=None,
    max_iter: int = 1000,
    tol: float = 1e-6,
    smoothness: float = 100.0,
) -> PmfFit:
    """Fit PMF by coordinate-ascent variational inference.

    Parameters
    ----------
    A : ExposureMatrix or array-like
        Nonnegative counts or binary indicators.
    k : int
        Number of latent components. May exceed the number of causes.
    alpha, beta : float
        Gamma prior shape and rate shared by patient and cause factors.
    mask : HoldoutMask or bool array, optional
        Held-out entries are excluded from the likelihood.
    max_iter, tol :
        Sweeps stop when the relative ELBO change falls below ``tol``.
    smoothness : float
        Concentration of the random initialisation; variational means start
        near 1 with relative spread ``1 / sqrt(smoothness)``.
    """
    if not (alpha > 0 and beta > 0):
        raise InvalidHyperparameterError(f"alpha and beta must be positive, got {alpha}, {beta}")
    if k < 1:
        raise ValueError("k must be at least 1")
    a = np.array(as_array(A), dtype=float)
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("PMF requires nonnegative finite counts")
    n, d = a.shape
    observed = observed_matrix(mask, a.shape)
    a_obs = np.where(observed, a, 0.0)
    w = observed.astype(float)

    rng = np.random.default_rng(seed)

    def init(shape):
        sh = smoothness * rng.gamma(smoothness, 1.0 / smoothness, size=shape)
        rt = smoothness * rng.gamma(smoothness, 1.0 / smoothness, size=shape)
        return sh, rt

    z_shape, z_rate = init((n, k))
    theta_shape, theta_rate = init((d, k))
    gz = np.exp(digamma(z_shape) - np.log(z_rate))
    gt = np.exp(digamma(theta_shape) - np.log(theta_rate))

    trace = [pmf_elbo(a, observed, z_shape, z_rate, theta_shape, theta_rate, alpha, beta)]
    converged = False
    for _ in range(max_iter):
        alloc_z, _ = _allocation_stats(a_obs, gz, gt)
        z_shape = alpha + alloc_z
        z_rate = beta + w @ (theta_shape / theta_rate)
        gz = np.exp(digamma(z_shape) - np.log(z_rate))

        _, alloc_t = _allocation_stats(a_obs, gz, gt)
        theta_shape = alpha + alloc_t
        theta_rate = beta + w.T @ (z_shape / z_rate)
        gt = np.exp(digamma(theta_shape) - np.log(theta_rate))

        trace.append(pmf_elbo(a, observed, z_shape, z_rate, theta_shape, theta_rate, alpha, beta))
        if abs(trace[-1] - trace[-2]) <= tol * abs(trace[-2]):
            converged = True
            break

    return PmfFit(
        z_shape=z_shape,
        z_rate=z_rate,
        theta_shape=theta_shape,
        theta_rate=theta_rate,
        hyper_alpha=float(alpha),
        hyper_beta=float(beta),
        elbo_trace=[float(x) for x in trace],
        converged=converged,
    )
