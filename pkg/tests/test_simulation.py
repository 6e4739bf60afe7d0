import numpy as np
import pytest

from meddeconf.exceptions import ConfigurationError
from meddeconf.outcome import fit_outcome
from meddeconf.simulation import MultiMedConfig, Setup, TwoMedConfig, simulate_multi_med, simulate_two_med


def test_two_med_truth():
    assert tuple(simulate_two_med(TwoMedConfig(setup=Setup.NO_CAUSE)).true_effects) == (0.0, 0.0)
    assert tuple(simulate_two_med(TwoMedConfig(setup=Setup.ONE_CAUSE)).true_effects) == (0.0, 0.3)


def test_two_med_moments():
    n = 10**6
    a = simulate_two_med(TwoMedConfig(n_patients=n, seed=5)).exposures.values
    var1 = a[:, 0].var()
    cov12 = np.cov(a.T)[0, 1]
    # analytic: 0.3^2 + 1 and 0.3 * 0.4; standard errors from Gaussian fourth moments
    se_var = np.sqrt(2 * 1.09**2 / n)
    se_cov = np.sqrt((1.09 * 1.16 + 0.12**2) / n)
    assert abs(var1 - 1.09) < 3 * se_var
    assert abs(cov12 - 0.12) < 3 * se_cov


def test_setup2_ols_limit():
    sigma = np.array([[1.09, 0.12], [0.12, 1.16]])
    # c = Cov(A, Y) = (0.3 * 0.5, 0.4 * 0.5) + Sigma @ (0, 0.3)
    c = np.array([0.15, 0.2]) + sigma @ np.array([0.0, 0.3])
    np.testing.assert_allclose(c, [0.186, 0.548])
    limit = np.linalg.solve(sigma, c)
    np.testing.assert_allclose(limit, [0.120, 0.460], atol=1e-3)

    cohort = simulate_two_med(TwoMedConfig(setup=Setup.ONE_CAUSE, seed=11))
    post = fit_outcome(cohort.outcomes, cohort.exposures)
    est = post.coef_mean[1:3]
    se = np.sqrt(np.diag(post.coef_scale_matrix)[1:3])
    assert np.all(np.abs(est - limit) < 4 * se)


def test_determinism():
    cfg = MultiMedConfig(n_patients=200, seed=3)
    assert simulate_multi_med(cfg) == simulate_multi_med(cfg)
    assert simulate_two_med(TwoMedConfig(seed=3)) == simulate_two_med(TwoMedConfig(seed=3))
    assert simulate_multi_med(cfg) != simulate_multi_med(MultiMedConfig(n_patients=200, seed=4))


def test_multi_med_defaults():
    c = simulate_multi_med(MultiMedConfig(seed=0))
    assert c.exposures.shape == (5000, 50)
    assert c.exposures.binary
    assert np.count_nonzero(c.true_effects) == 10
    col_means = c.exposures.values.mean(axis=0)
    assert np.all((col_means > 0) & (col_means < 1))
    assert abs(col_means.mean() - 0.5) < 0.05
    assert len(set(c.cause_labels)) == 50 and c.cause_labels[0] == "med01"


def test_multi_med_marginal_over_seeds():
    means = [simulate_multi_med(MultiMedConfig(n_patients=500, seed=s)).exposures.values.mean() for s in range(20)]
    assert abs(np.mean(means) - 0.5) < 0.02


def test_full_sparsity():
    c = simulate_multi_med(MultiMedConfig(n_patients=50, sparsity=1.0, seed=1))
    assert np.all(c.true_effects == 0)


def test_confounding_present():
    c = simulate_multi_med(MultiMedConfig(n_patients=2000, seed=2))
    a, conf = c.exposures.values, c.true_confounders
    corr = np.corrcoef(np.hstack([a, conf]).T)[: a.shape[1], a.shape[1]:]
    assert np.max(np.abs(corr)) > 0.05


@pytest.mark.parametrize("kwargs", [{"sparsity": 1.5}, {"k_confounder": 0}, {"n_causes": 1}])
def test_bad_config(kwargs):
    with pytest.raises(ConfigurationError):
        MultiMedConfig(**kwargs)
