from __future__ import annotations

import numpy as np

from ..data import SubstituteConfounder
from ..holdout import HoldoutMask


class FactorFit:
    """Shared posterior machinery for fitted factor models.

    Subclasses provide ``family`` ("gaussian" or "poisson"), ``source_model``,
    ``posterior_mean_latent``, ``sample_latent`` and ``entry_means``.
    """

    family = None
    source_model = None

    @property
    def n_patients(self) -> int:
        raise NotImplementedError

    @property
    def n_causes(self) -> int:
        raise NotImplementedError

    def posterior_mean_latent(self) -> np.ndarray:
        raise NotImplementedError

    def sample_latent(self, rng: np.random.Generator) -> np.ndarray:
        """One joint draw of every patient's latent variables."""
        raise NotImplementedError

    def entry_means(self, latent: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Mean of the likelihood at entries ``(rows, cols)`` given a latent draw."""
        raise NotImplementedError

    def sample_entries(self, means: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.family == "poisson":
            return rng.poisson(means).astype(float)
        return means + np.sqrt(self.noise_var) * rng.standard_normal(means.shape)

    def substitute(self) -> SubstituteConfounder:
        return SubstituteConfounder(self.posterior_mean_latent(), source_model=self.source_model)

    def posterior_predictive_samples(self, mask: HoldoutMask, n_rep: int = 100, seed=None) -> np.ndarray:
        """Replicated held-out entries, shape ``(n_rep, n_heldout)``.

        Each replicate draws the latents from their posterior with the global
        parameters fixed, then draws the held-out entries from the likelihood.
        Entries are ordered as ``mask.indices()``.
        """
        if mask.shape != (self.n_patients, self.n_causes):
            raise IndexError(f"mask shape {mask.shape} does not match fit {(self.n_patients, self.n_causes)}")
        rows, cols = mask.indices()
        rng = np.random.default_rng(seed)
        out = np.empty((n_rep, rows.size))
        for r in range(n_rep):
            z = self.sample_latent(rng)
            out[r] = self.sample_entries(self.entry_means(z, rows, cols), rng)
        return out
