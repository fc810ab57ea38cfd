"""The learner zoo behind one fit/encode contract."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..traincore import load_checkpoint, save_checkpoint
from .base import Batch, Diagnostics, Learner, ModelConfig, NotFittedError, TrainingDiverged
from .gated import GatedPredAE
from .jepa import JEPA, PredEnc
from .linear import PCASlice, RandProj
from .vae import VAE, LatentPredVAE, PredVAE

KINDS: dict[str, type[Learner]] = {
    cls.kind: cls
    for cls in (VAE, JEPA, PredVAE, LatentPredVAE, PredEnc, RandProj, PCASlice, GatedPredAE)
}


def make_learner(kind: str, cfg: ModelConfig | None = None, seed: int = 0) -> Learner:
    try:
        cls = KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(KINDS)}") from None
    return cls(cfg, seed=seed)


def fit_learner(kind: str, ds, cfg: ModelConfig | None = None, seed: int = 0) -> Learner:
    return make_learner(kind, cfg, seed).fit(ds)


_NETS = {
    "vae": ("enc", "dec"),
    "predvae": ("enc", "dec", "pred"),
    "latentpredvae": ("enc", "dec", "pred"),
    "jepa": ("enc_s", "enc_t", "pred"),
    "predenc": ("enc", "pred"),
    "gatedpredae": ("enc", "dec", "pred"),
}
_ARRAYS = {
    "randproj": ("W",),
    "pca": ("mean", "components", "eigvals"),
    "gatedpredae": ("logits",),
}


def save_learner(learner: Learner, path, extra_meta: dict | None = None) -> Path:
    """Checkpoint a fitted learner (kind, config echo, seed, gate state)."""
    if not learner.fitted:
        raise NotFittedError("cannot checkpoint an unfitted learner")
    kind = learner.kind
    nets = {name: getattr(learner, name) for name in _NETS.get(kind, ())}
    arrays = {name: getattr(learner, name) for name in _ARRAYS.get(kind, ())}
    meta = {"kind": kind, "seed": learner.seed, "config": learner.cfg.__dict__, **(extra_meta or {})}
    if kind == "gatedpredae":
        meta["gate_selected"] = [int(i) for i in learner.selected]
    return save_checkpoint(path, nets, arrays, meta)


def load_learner(path) -> Learner:
    nets, arrays, meta = load_checkpoint(path)
    learner = make_learner(meta["kind"], ModelConfig(**meta["config"]), meta["seed"])
    for name, net in nets.items():
        setattr(learner, name, net)
    for name, arr in arrays.items():
        setattr(learner, name, np.array(arr))
    learner.fitted = True
    return learner


__all__ = [
    "Batch", "Diagnostics", "Learner", "ModelConfig", "NotFittedError", "TrainingDiverged",
    "VAE", "JEPA", "PredVAE", "LatentPredVAE", "PredEnc", "RandProj", "PCASlice", "GatedPredAE",
    "KINDS", "make_learner", "fit_learner", "save_learner", "load_learner",
]
