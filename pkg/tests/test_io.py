import json

import numpy as np
import pytest

from meddeconf.factor_models import fit_def, fit_pmf, fit_ppca, load_fit, save_fit
from meddeconf.holdout import make_holdout_mask


@pytest.fixture
def counts():
    return np.random.default_rng(0).poisson(1.0, size=(20, 5)).astype(float)


def fits(counts):
    mask = make_holdout_mask(20, 5, 0.2, seed=0)
    yield fit_ppca(counts, 2, seed=0, mask=mask)
    yield fit_pmf(counts, 3, seed=0, mask=mask, max_iter=20)
    yield fit_def(counts, (3, 2), seed=0, mask=mask, n_steps=20)


def test_round_trip_preserves_posterior(tmp_path, counts):
    mask = make_holdout_mask(20, 5, 0.2, seed=0)
    for fit in fits(counts):
        path = save_fit(fit, tmp_path / f"{fit.source_model}.npz")
        back = load_fit(path)
        assert type(back) is type(fit)
        np.testing.assert_array_equal(back.posterior_mean_latent(), fit.posterior_mean_latent())
        np.testing.assert_array_equal(
            back.posterior_predictive_samples(mask, 5, seed=1), fit.posterior_predictive_samples(mask, 5, seed=1)
        )


def test_header_is_versioned(tmp_path, counts):
    fit = fit_pmf(counts, 2, seed=0, max_iter=5)
    path = save_fit(fit, tmp_path / "f.npz")
    with np.load(path) as archive:
        header = json.loads(str(archive["__header__"]))
    assert header["format"] == "meddeconf-fit" and header["version"] == 1 and header["model"] == "PMF"


def test_rejects_newer_version(tmp_path):
    header = {"format": "meddeconf-fit", "version": 99, "model": "PMF"}
    np.savez(tmp_path / "f.npz", __header__=np.array(json.dumps(header)))
    with pytest.raises(ValueError, match="newer"):
        load_fit(tmp_path / "f.npz")


def test_rejects_foreign_archive(tmp_path):
    np.savez(tmp_path / "f.npz", __header__=np.array(json.dumps({"format": "other"})))
    with pytest.raises(ValueError):
        load_fit(tmp_path / "f.npz")
