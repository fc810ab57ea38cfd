from __future__ import annotations

import time
from dataclasses import dataclass, field, fields, replace
from typing import ClassVar

import numpy as np

from ..env import Dataset
from ..numerics import Rng
from ..traincore import OptState


@dataclass(frozen=True)
class ModelConfig:
    latent_dim: int = 4
    hidden: int = 0  # 0 = single affine layer; >0 = one tanh hidden layer
    lr: float = 3e-3
    optimizer: str = "adam"
    steps: int = 4_000
    batch: int = 256
    clip_norm: float = 10.0
    log_every: int = 500
    # VAE family
    beta: float = 1e-3
    lambda_pred: float = 1.0
    # JEPA
    tau: float = 0.99
    # Predictive encoder
    rounds: int = 5
    target_stopgrad: bool = True  # predictive encoder only
    # gated predictive AE
    gate_width: int = 8
    gate_forward: str = "hard"
    pred_norm: str = "white"  # none | var | white
    # PCA
    slice_start: int = 0

    def with_overrides(self, **kw) -> "ModelConfig":
        known = {f.name for f in fields(self)}
        unknown = set(kw) - known
        if unknown:
            raise KeyError(f"unknown model option(s): {sorted(unknown)}")
        return replace(self, **kw)


class TrainingDiverged(FloatingPointError):
    def __init__(self, step: int, loss: float):
        self.step = step
        super().__init__(f"loss became non-finite ({loss}) at step {step}")


class NotFittedError(RuntimeError):
    pass


@dataclass
class Batch:
    x: np.ndarray  # x_t rows
    x_next: np.ndarray | None = None  # x_{t+1} rows, for pair objectives
    eps: np.ndarray | None = None  # reparameterisation noise for x_t
    eps_next: np.ndarray | None = None


@dataclass
class Diagnostics:
    steps: int = 0
    clip_count: int = 0
    loss: list[float] = field(default_factory=list)
    latent_var: list[float] = field(default_factory=list)
    z_norm: list[float] = field(default_factory=list)
    collapsed: bool = False
    reinit_rows: int = 0
    wall_ms: float = 0.0

    def flags(self) -> list[str]:
        out = []
        if self.collapsed:
            out.append("collapsed")
        if self.clip_count:
            out.append("clipped")
        return out


COLLAPSE_VAR = 1e-6


class Learner:
    """Fit on the training prefix of a dataset, then encode observations.

    Trainable subclasses expose their parameters through :meth:`params` and
    implement :meth:`loss_and_grads` for a :class:`Batch`; the generic loop
    below samples minibatches, clips, steps the optimiser and logs.
    """

    kind: ClassVar[str] = "base"
    uses_pairs: ClassVar[bool] = False
    n_eps: ClassVar[int] = 0  # width of reparameterisation noise per row

    def __init__(self, cfg: ModelConfig | None = None, seed: int = 0):
        self.cfg = cfg or ModelConfig()
        self.seed = seed
        self.rng = Rng(seed)
        self.diag = Diagnostics()
        self.fitted = False

    # --- contract ----------------------------------------------------------
    def fit(self, ds: Dataset) -> "Learner":
        t0 = time.perf_counter()
        if ds.split < (2 if self.uses_pairs else 1):
            raise ValueError("training split too short")
        self.build(ds.X.shape[1])
        self.train(ds)
        self.fitted = True
        self.diag.wall_ms = (time.perf_counter() - t0) * 1e3
        return self

    def encode(self, X: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise NotFittedError(f"{self.kind} learner used before fit")
        return self._encode(np.asarray(X, dtype=float))

    @property
    def latent_dim(self) -> int:
        return self.cfg.latent_dim

    def build(self, n_x: int) -> None:
        raise NotImplementedError

    def _encode(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def train(self, ds: Dataset) -> None:
        self.run_steps(ds, self.cfg.steps)

    # --- gradient-based training --------------------------------------------
    def params(self) -> list[np.ndarray]:
        return []

    def param_names(self) -> list[str]:
        return [f"p{i}" for i in range(len(self.params()))]

    def loss_and_grads(self, batch: Batch) -> tuple[float, list[np.ndarray]]:
        raise NotImplementedError

    def after_step(self) -> None:
        pass

    def touch(self) -> None:
        pass

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, theta: np.ndarray) -> None:
        i = 0
        for p in self.params():
            p[...] = theta[i : i + p.size].reshape(p.shape)
            i += p.size
        self.touch()

    def sample_batch(self, X: np.ndarray, split: int, rng: Rng) -> Batch:
        B = self.cfg.batch
        # pairs (t, t+1) stay inside the training prefix
        hi = split - 1 if self.uses_pairs else split
        idx = rng.integers(0, hi, B)
        batch = Batch(x=X[idx])
        if self.uses_pairs:
            batch.x_next = X[idx + 1]
        if self.n_eps:
            batch.eps = rng.normal((B, self.n_eps))
            if self.uses_pairs:
                batch.eps_next = rng.normal((B, self.n_eps))
        return batch

    def run_steps(self, ds: Dataset, steps: int, active: list[int] | None = None,
                  opt: OptState | None = None) -> OptState:
        """Run ``steps`` optimiser steps, updating only params with index in ``active``."""
        params = self.params()
        active = list(range(len(params))) if active is None else active
        names = self.param_names()
        opt = opt or OptState(lr=self.cfg.lr, rule=self.cfg.optimizer)
        X, split = ds.X, ds.split
        for step in range(steps):
            batch = self.sample_batch(X, split, self.rng)
            loss, grads = self.loss_and_grads(batch)
            if not np.isfinite(loss):
                raise TrainingDiverged(self.diag.steps, loss)
            g_active = [grads[i] for i in active]
            if opt.apply([params[i] for i in active], g_active, [names[i] for i in active],
                         clip_norm=self.cfg.clip_norm):
                self.diag.clip_count += 1
            self.touch()
            self.after_step()
            self.diag.steps += 1
            if self.diag.steps % self.cfg.log_every == 0:
                self.log(ds, loss)
        return opt

    def log(self, ds: Dataset, loss: float) -> None:
        self.diag.loss.append(float(loss))
        Z = self._encode(ds.X_train)
        var = float(np.mean(np.var(Z, axis=0)))
        self.diag.latent_var.append(var)
        self.diag.z_norm.append(float(np.mean(np.linalg.norm(Z, axis=1))))
        if var < COLLAPSE_VAR:
            self.diag.collapsed = True
