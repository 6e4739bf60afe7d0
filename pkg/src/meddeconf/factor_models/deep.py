"""Two-layer Gamma deep exponential family with a Poisson observation layer.

Model, with every Gamma in (shape, rate) form::

    W1[k, :] ~ Gamma(alpha, beta)          (K1, K2) upper weights
    W0[d, :] ~ Gamma(alpha, beta)          (D, K1) observation weights
    z2_i     ~ Gamma(alpha, beta)          (K2,)
    z1_ik | z2_i ~ Gamma(alpha, g(W1[k] . z2_i))
    a_id | z1_i  ~ Poisson(g(W0[d] . z1_i))

Inference is black-box variational inference with a mean-field log-normal
family on every positive latent. Gradients are reparameterized
(``x = exp(mu + s * eps)``) and derived by hand below; Adam with a decaying
step size does the optimisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from ..data import SubstituteConfounder, as_array
from ..exceptions import DivergenceError
from ..holdout import observed_matrix
from ._base import FactorFit

__all__ = ["DefFit", "fit_def", "def_elbo_and_grad", "LINKS", "BLOCKS"]

BLOCKS = ("z1", "z2", "w1", "w0")
HALF_LOG_2PI_E = 0.5 * np.log(2 * np.pi * np.e)


def _softplus(x, floor):
    e = np.exp(-np.abs(x))
    inv = 1.0 / (1.0 + e)
    return np.maximum(x, 0.0) + np.log1p(e) + floor, np.where(x >= 0, inv, e * inv)


def _identity(x, floor):
    return x + floor, np.ones_like(x)


LINKS = {"softplus": _softplus, "identity": _identity}


@dataclass(eq=False)
class DefFit(FactorFit):
    """Variational parameters of a fitted two-layer DEF.

    ``loc[name]`` and ``scale[name]`` hold the log-normal location and scale
    for each block in ``BLOCKS``.
    """

    loc: dict
    scale: dict
    hyper_alpha: float = 0.3
    hyper_beta: float = 0.3
    link: str = "softplus"
    link_floor: float = 1e-5
    elbo_trace: list = field(default_factory=list)
    best_step: int = 0

    family = "poisson"
    source_model = "DEF"

    @property
    def n_patients(self):
        return self.loc["z1"].shape[0]

    @property
    def n_causes(self):
        return self.loc["w0"].shape[0]

    @property
    def layer_sizes(self):
        return self.loc["z1"].shape[1], self.loc["z2"].shape[1]

    def mean(self, name):
        return np.exp(self.loc[name] + 0.5 * self.scale[name] ** 2)

    def posterior_mean_latent(self):
        return self.mean("z1")

    def substitute(self, include_upper: bool = False) -> SubstituteConfounder:
        z = self.mean("z1")
        if include_upper:
            z = np.hstack([z, self.mean("z2")])
        return SubstituteConfounder(z, source_model="DEF")

    def sample_latent(self, rng):
        return np.exp(self.loc["z1"] + self.scale["z1"] * rng.standard_normal(self.loc["z1"].shape))

    def entry_means(self, latent, rows, cols):
        w0 = self.mean("w0")
        eta = np.einsum("nk,nk->n", latent[rows], w0[cols])
        return LINKS[self.link](eta, self.link_floor)[0]

    def smoothed_elbo(self, window: int = 100):
        return _trailing_mean(np.asarray(self.elbo_trace), window)


def _trailing_mean(x, window):
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def _gamma_logpdf_terms(x, log_x, shape, rate):
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * log_x - rate * x


def def_elbo_and_grad(
    loc, log_scale, a, observed, eps, alpha=0.3, beta=0.3, link="softplus", floor=1e-5, log_factorial=None
):
    """Single-sample reparameterized ELBO estimate and its exact gradient.

    Parameters
    ----------
    loc, log_scale : dict of ndarray
        Variational parameters keyed by ``BLOCKS``.
    eps : dict of ndarray
        Standard-normal noise for each block. Holding it fixed gives a
        deterministic function of the parameters (common random numbers).
    log_factorial : float, optional
        Precomputed ``sum(observed * log(a!))``; a constant of the data.

    Returns
    -------
    elbo : float
    grad_loc, grad_log_scale : dict of ndarray
    """
    g = LINKS[link]
    scale = {b: np.exp(log_scale[b]) for b in BLOCKS}
    u = {b: loc[b] + scale[b] * eps[b] for b in BLOCKS}
    x = {b: np.exp(u[b]) for b in BLOCKS}
    z1, z2, w1, w0 = x["z1"], x["z2"], x["w1"], x["w0"]

    # observation layer
    eta0 = z1 @ w0.T
    rate0, drate0 = g(eta0, floor)
    wobs = observed if observed.dtype == float else observed.astype(float)
    if log_factorial is None:
        log_factorial = np.sum(wobs * gammaln(a + 1.0))
    lik = np.sum(wobs * (a * np.log(rate0) - rate0)) - log_factorial
    g_eta0 = wobs * (a / rate0 - 1.0) * drate0
    dx = {"z1": g_eta0 @ w0, "w0": g_eta0.T @ z1}

    # first latent layer given the second
    eta1 = z2 @ w1.T
    rate1, drate1 = g(eta1, floor)
    lp1 = np.sum(_gamma_logpdf_terms(z1, u["z1"], alpha, rate1))
    g_eta1 = (alpha / rate1 - z1) * drate1
    dx["z1"] = dx["z1"] - rate1
    dx["z2"] = g_eta1 @ w1
    dx["w1"] = g_eta1.T @ z2

    # Gamma(alpha, beta) priors on the top layer and the weights
    lp_prior = 0.0
    for b in ("z2", "w1", "w0"):
        lp_prior += np.sum(_gamma_logpdf_terms(x[b], u[b], alpha, beta))
        dx[b] = dx[b] - beta

    entropy = sum(np.sum(log_scale[b]) + loc[b].size * HALF_LOG_2PI_E + np.sum(loc[b]) for b in BLOCKS)
    elbo = lik + lp1 + lp_prior + entropy

    grad_loc, grad_log_scale = {}, {}
    for b in BLOCKS:
        # d/du of f(exp(u)); the (alpha - 1) log x terms contribute alpha - 1
        g_u = dx[b] * x[b] + (alpha - 1.0)
        grad_loc[b] = g_u + 1.0
        grad_log_scale[b] = g_u * scale[b] * eps[b] + 1.0
    return float(elbo), grad_loc, grad_log_scale


def fit_def(
    A,
    layer_sizes=(30, 4),
    alpha: float = 0.3,
    beta: float = 0.3,
    seed=None,
    mask=None,
    n_steps: int = 10_000,
    learning_rate: float = 0.05,
    decay_steps: float = 1000.0,
    n_samples: int = 1,
    link: str = "softplus",
    link_floor: float = 1e-5,
    window: int = 100,
    init_scale: float = 0.1,
    init: str = "random",
    dtype=np.float32,
) -> DefFit:
    """Fit a two-layer DEF by reparameterized gradient ascent on the ELBO.

    The step size decays as ``learning_rate / sqrt(1 + step / decay_steps)``.
    The returned parameters are the iterate with the best ELBO averaged over
    the trailing ``window`` steps, evaluated every ``window`` steps.
    Optimisation runs in ``dtype`` (single precision by default, for speed);
    the returned parameters are double precision.

    Raises
    ------
    DivergenceError
        If the ELBO estimate becomes non-finite.
    """
    k1, k2 = (int(s) for s in layer_sizes)
    if not k1 > k2 >= 1:
        raise ValueError(f"layer sizes must satisfy K1 > K2 >= 1, got {layer_sizes}")
    if link not in LINKS:
        raise ValueError(f"unknown link {link!r}; choose from {sorted(LINKS)}")
    a = np.array(as_array(A), dtype=float)
    if np.any(a < 0):
        raise ValueError("DEF requires nonnegative counts")
    n, d = a.shape
    if d < 2:
        raise ValueError("DEF requires at least two causes")
    observed = observed_matrix(mask, a.shape).astype(float)
    a = a * observed
    log_factorial = float(np.sum(observed * gammaln(a + 1.0)))
    a, observed = a.astype(dtype), observed.astype(dtype)
    rng = np.random.default_rng(seed)

    shapes = {"z1": (n, k1), "z2": (n, k2), "w1": (k1, k2), "w0": (d, k1)}
    # start the observation layer near the empirical mean rate
    mean_rate = max(a.sum() / max(observed.sum(), 1), 1e-3)
    start = {
        "z1": np.log(alpha / beta),
        "z2": np.log(alpha / beta),
        "w1": np.log(alpha / beta),
        "w0": np.log(mean_rate / (k1 * alpha / beta)),
    }
    loc = {b: (start[b] + init_scale * rng.standard_normal(shapes[b])).astype(dtype) for b in BLOCKS}
    if init == "pmf":
        from .pmf import fit_pmf

        warm = fit_pmf(a.astype(float), k1, alpha=alpha, beta=beta, seed=rng.integers(2**32), mask=mask, max_iter=200)
        loc["z1"] = np.log(warm.posterior_mean_latent()).astype(dtype)
        loc["w0"] = np.log(warm.theta_mean).astype(dtype)
    elif init != "random":
        raise ValueError(f"unknown init {init!r}; choose 'random' or 'pmf'")
    log_scale = {b: np.full(shapes[b], np.log(init_scale), dtype=dtype) for b in BLOCKS}

    params = [loc[b] for b in BLOCKS] + [log_scale[b] for b in BLOCKS]
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    b1, b2, adam_eps = 0.9, 0.999, 1e-8

    trace = []
    best_val, best_step = -np.inf, 0
    best = ({b: loc[b].copy() for b in BLOCKS}, {b: log_scale[b].copy() for b in BLOCKS})
    for step in range(1, n_steps + 1):
        elbo, grads = 0.0, None
        for _ in range(n_samples):
            eps = {b: rng.standard_normal(shapes[b], dtype=dtype) for b in BLOCKS}
            val, gl, gs = def_elbo_and_grad(
                loc, log_scale, a, observed, eps, alpha, beta, link, link_floor, log_factorial
            )
            elbo += val / n_samples
            sample_grads = [gl[b] for b in BLOCKS] + [gs[b] for b in BLOCKS]
            if n_samples == 1:
                grads = sample_grads
            elif grads is None:
                grads = [gr / n_samples for gr in sample_grads]
            else:
                for acc, gr in zip(grads, sample_grads):
                    acc += gr / n_samples
        if not np.isfinite(elbo):
            raise DivergenceError(f"DEF ELBO became non-finite at step {step}")
        trace.append(elbo)

        lr = learning_rate / np.sqrt(1.0 + step / decay_steps)
        corr1, corr2 = 1.0 - b1**step, 1.0 - b2**step
        for p, g_, mm, vv in zip(params, grads, m1, m2):
            mm *= b1
            mm += (1.0 - b1) * g_
            vv *= b2
            vv += (1.0 - b2) * g_ * g_
            p += lr * (mm / corr1) / (np.sqrt(vv / corr2) + adam_eps)
        for p in params[len(BLOCKS):]:
            np.clip(p, -10.0, 2.0, out=p)

        if step % window == 0:
            smoothed = float(np.mean(trace[-window:]))
            if smoothed > best_val:
                best_val, best_step = smoothed, step
                best = ({b: loc[b].copy() for b in BLOCKS}, {b: log_scale[b].copy() for b in BLOCKS})

    if n_steps < window:
        best_step = n_steps
        best = (loc, log_scale)
    best_loc, best_log_scale = best
    return DefFit(
        loc={b: best_loc[b].astype(float) for b in BLOCKS},
        scale={b: np.exp(best_log_scale[b].astype(float)) for b in BLOCKS},
        hyper_alpha=float(alpha),
        hyper_beta=float(beta),
        link=link,
        link_floor=float(link_floor),
        elbo_trace=trace,
        best_step=best_step,
    )
