"""Versioned on-disk format for fitted factor models.

A fit is stored as an ``.npz`` archive: arrays under their field names and a
JSON header (``__header__``) with the model tag, format version and scalars.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .deep import BLOCKS, DefFit
from .pmf import PmfFit
from .ppca import PpcaFit

FORMAT_VERSION = 1

_ARRAYS = {
    "PPCA": ("loadings", "z_post_mean", "z_post_cov"),
    "PMF": ("z_shape", "z_rate", "theta_shape", "theta_rate"),
}
_SCALARS = {
    "PPCA": ("noise_var", "prior_scale", "loglik_trace", "converged"),
    "PMF": ("hyper_alpha", "hyper_beta", "elbo_trace", "converged"),
    "DEF": ("hyper_alpha", "hyper_beta", "link", "link_floor", "elbo_trace", "best_step"),
}
_CLASSES = {"PPCA": PpcaFit, "PMF": PmfFit, "DEF": DefFit}


def save_fit(fit, path) -> Path:
    path = Path(path)
    tag = fit.source_model
    header = {"format": "meddeconf-fit", "version": FORMAT_VERSION, "model": tag}
    header.update({name: getattr(fit, name) for name in _SCALARS[tag]})
    if tag == "DEF":
        arrays = {f"loc_{b}": fit.loc[b] for b in BLOCKS}
        arrays.update({f"scale_{b}": fit.scale[b] for b in BLOCKS})
    else:
        arrays = {name: getattr(fit, name) for name in _ARRAYS[tag]}
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header)), **arrays)
    return path


def load_fit(path):
    with np.load(Path(path), allow_pickle=False) as archive:
        header = json.loads(str(archive["__header__"]))
        if header.get("format") != "meddeconf-fit":
            raise ValueError(f"{path} is not a saved factor-model fit")
        if header["version"] > FORMAT_VERSION:
            raise ValueError(f"fit format version {header['version']} is newer than supported {FORMAT_VERSION}")
        tag = header["model"]
        kwargs = {name: header[name] for name in _SCALARS[tag]}
        if tag == "DEF":
            kwargs["loc"] = {b: archive[f"loc_{b}"] for b in BLOCKS}
            kwargs["scale"] = {b: archive[f"scale_{b}"] for b in BLOCKS}
        else:
            kwargs.update({name: archive[name] for name in _ARRAYS[tag]})
    return _CLASSES[tag](**kwargs)
