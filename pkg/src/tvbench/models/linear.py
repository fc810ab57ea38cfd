"""Training-free linear baselines: random projections and PCA slices."""

from __future__ import annotations

import numpy as np

from ..numerics import eig_sym
from ..traincore import renorm_rows_unit
from .base import Learner


def random_unit_rows(rng, k: int, n: int) -> np.ndarray:
    W = rng.normal((k, n))
    while np.any(np.linalg.norm(W, axis=1) == 0):
        W = rng.normal((k, n))
    return renorm_rows_unit(W)


class RandProj(Learner):
    """Fixed random k x n_x encoder with unit-norm rows."""

    kind = "randproj"

    def build(self, n_x: int) -> None:
        self.W = random_unit_rows(self.rng, self.latent_dim, n_x)

    def train(self, ds) -> None:
        pass

    def _encode(self, X):
        return X @ self.W.T


class PCASlice(Learner):
    """Projection onto principal components [start, start + k) of the train X."""

    kind = "pca"

    def build(self, n_x: int) -> None:
        start, k = self.cfg.slice_start, self.latent_dim
        if start < 0 or start + k > n_x:
            raise ValueError(f"component slice [{start}, {start + k}) outside 0..{n_x}")

    def train(self, ds) -> None:
        X = ds.X_train
        self.mean = X.mean(axis=0)
        Xc = X - self.mean
        cov = Xc.T @ Xc / (X.shape[0] - 1)
        self.eigvals, V = eig_sym(cov)
        start = self.cfg.slice_start
        self.components = V[:, start : start + self.latent_dim]

    def _encode(self, X):
        return (X - self.mean) @ self.components
