import numpy as np
import pytest
from scipy import integrate, special, stats

from meddeconf.exceptions import InvalidHyperparameterError
from meddeconf.factor_models import PmfFit, fit_pmf, pmf_elbo, substitute_confounder
from meddeconf.holdout import make_holdout_mask
from meddeconf.simulation import MultiMedConfig, simulate_multi_med


def poisson_data(rng, n=60, d=8, k=3):
    z = rng.gamma(1.0, 1.0, size=(n, k))
    theta = rng.gamma(1.0, 0.5, size=(d, k))
    return rng.poisson(z @ theta.T).astype(float)


def assert_monotone(trace):
    trace = np.asarray(trace)
    assert np.all(np.diff(trace) >= -1e-6 * np.abs(trace[1:]))


@pytest.mark.parametrize("seed", range(4))
def test_elbo_monotone_counts(seed):
    rng = np.random.default_rng(seed)
    a = poisson_data(rng)
    fit = fit_pmf(a, 4, seed=seed, mask=make_holdout_mask(*a.shape, 0.2, seed=seed))
    assert len(fit.elbo_trace) > 2
    assert_monotone(fit.elbo_trace)


def test_elbo_monotone_binary():
    a = simulate_multi_med(MultiMedConfig(n_patients=300, n_causes=20, seed=1)).exposures
    fit = fit_pmf(a, 5, seed=0)
    assert_monotone(fit.elbo_trace)
    assert fit.converged


def test_elbo_single_entry_matches_quadrature():
    # one patient, one cause, K = 1: the ELBO with the allocation at its optimum is
    # E_q[log Poisson(a | z theta)] + E_q[log p(z) + log p(theta)] + H[q], computed here by
    # numerical integration over q(z) q(theta), which is independent of the closed form.
    a, alpha, beta = 3.0, 0.7, 1.3
    zs, zr, ts, tr = 2.5, 1.5, 1.8, 0.9
    qz, qt = stats.gamma(zs, scale=1 / zr), stats.gamma(ts, scale=1 / tr)
    prior = stats.gamma(alpha, scale=1 / beta)

    def expect(f, q):
        return integrate.quad(lambda x: f(x) * q.pdf(x), 0, np.inf, limit=200)[0]

    e_log = expect(np.log, qz) + expect(np.log, qt)
    e_rate = qz.mean() * qt.mean()
    data = a * e_log - e_rate - special.gammaln(a + 1)
    rest = expect(prior.logpdf, qz) + expect(prior.logpdf, qt) + qz.entropy() + qt.entropy()
    got = pmf_elbo(
        np.array([[a]]), np.ones((1, 1), bool), np.array([[zs]]), np.array([[zr]]),
        np.array([[ts]]), np.array([[tr]]), alpha, beta,
    )
    assert got == pytest.approx(data + rest, rel=1e-7)


def test_gamma_mean_substitute():
    fit = PmfFit(
        z_shape=np.array([[2.0]]), z_rate=np.array([[4.0]]),
        theta_shape=np.ones((2, 1)), theta_rate=np.ones((2, 1)),
    )
    assert substitute_confounder(fit).values[0, 0] == 0.5


def test_zero_column_rates_shrink():
    rng = np.random.default_rng(3)
    a = poisson_data(rng, n=80, d=6, k=2)
    a[:, 2] = 0.0
    alpha, beta, k = 0.3, 0.3, 4
    fit = fit_pmf(a, k, alpha=alpha, beta=beta, seed=0)
    prior_mean_rate = k * (alpha / beta) ** 2
    assert np.all(fit.rate_mean()[:, 2] < prior_mean_rate)
    assert np.all(fit.rate_mean()[:, 2] < 0.05)


def test_zero_rate_replicates_are_zero():
    fit = PmfFit(
        z_shape=np.ones((3, 1)), z_rate=np.full((3, 1), 1e300),
        theta_shape=np.ones((4, 1)), theta_rate=np.ones((4, 1)),
    )
    mask = make_holdout_mask(3, 4, 0.5, seed=0)
    assert np.all(fit.posterior_predictive_samples(mask, n_rep=20, seed=0) == 0)


def test_replicates_bracket_heldout_means():
    rng = np.random.default_rng(7)
    a = poisson_data(rng, n=400, d=10, k=3)
    mask = make_holdout_mask(*a.shape, 0.2, seed=7)
    fit = fit_pmf(a, 3, seed=1, mask=mask)
    rows, cols = mask.indices()
    reps = fit.posterior_predictive_samples(mask, n_rep=100, seed=2)
    hits = 0
    for j in range(a.shape[1]):
        sel = cols == j
        col_means = reps[:, sel].mean(axis=1)
        obs = a[rows[sel], j].mean()
        hits += col_means.min() <= obs <= col_means.max()
    assert hits >= 0.5 * a.shape[1]


def test_k_may_exceed_causes():
    a = poisson_data(np.random.default_rng(0), n=30, d=4)
    fit = fit_pmf(a, 10, seed=0, max_iter=50)
    assert fit.z_shape.shape == (30, 10) and fit.theta_shape.shape == (4, 10)


def test_invalid_inputs():
    a = np.ones((5, 3))
    with pytest.raises(InvalidHyperparameterError):
        fit_pmf(a, 2, alpha=0.0)
    with pytest.raises(ValueError):
        fit_pmf(-a, 2)


def test_deterministic():
    a = poisson_data(np.random.default_rng(1))
    one, two = fit_pmf(a, 3, seed=5), fit_pmf(a, 3, seed=5)
    np.testing.assert_array_equal(one.z_shape, two.z_shape)
    assert one.elbo_trace == two.elbo_trace
