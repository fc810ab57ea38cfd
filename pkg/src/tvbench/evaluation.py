"""Linear-probe scoring of learned latents against the true state."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .numerics import solve_ols


@dataclass
class ProbeResult:
    W: np.ndarray
    r2_eval: float
    r2_train: float
    r2_per_dim: np.ndarray
    degenerate_dims: tuple[int, ...] = ()


def fit_probe(Z_train, S_train, intercept: bool = False) -> np.ndarray:
    return solve_ols(Z_train, S_train, with_intercept=intercept)


def apply_probe(W: np.ndarray, Z: np.ndarray) -> np.ndarray:
    if W.shape[1] == Z.shape[1] + 1:
        return Z @ W[:, :-1].T + W[:, -1]
    return Z @ W.T


def r2_score(S_hat, S) -> tuple[float, np.ndarray]:
    """Per-dimension 1 - SSE/SST about the column means of ``S``.

    Dimensions with zero SST are reported as NaN and left out of the
    uniform average.
    """
    S_hat, S = np.asarray(S_hat, dtype=float), np.asarray(S, dtype=float)
    if S_hat.shape != S.shape:
        raise ValueError(f"shape mismatch {S_hat.shape} vs {S.shape}")
    if S.shape[0] < 2:
        raise ValueError("need at least two rows")
    sse = np.sum((S - S_hat) ** 2, axis=0)
    sst = np.sum((S - S.mean(axis=0)) ** 2, axis=0)
    per_dim = np.full(S.shape[1], np.nan)
    ok = sst > 0
    per_dim[ok] = 1.0 - sse[ok] / sst[ok]
    if not ok.all():
        warnings.warn(f"zero variance in state dims {np.flatnonzero(~ok).tolist()}", RuntimeWarning)
    agg = float(np.mean(per_dim[ok])) if ok.any() else math.nan
    return agg, per_dim


def probe_latents(Z_train, S_train, Z_eval, S_eval, intercept: bool = False) -> ProbeResult:
    W = fit_probe(Z_train, S_train, intercept)
    r2_eval, per_dim = r2_score(apply_probe(W, Z_eval), S_eval)
    r2_train, _ = r2_score(apply_probe(W, Z_train), S_train)
    degenerate = tuple(int(i) for i in np.flatnonzero(np.isnan(per_dim)))
    return ProbeResult(W=W, r2_eval=r2_eval, r2_train=r2_train, r2_per_dim=per_dim,
                       degenerate_dims=degenerate)


def probe_eval(learner, ds, intercept: bool = False) -> ProbeResult:
    """Encode both splits, fit the probe on train only, score on eval."""
    return probe_latents(learner.encode(ds.X_train), ds.S_train,
                         learner.encode(ds.X_eval), ds.S_eval, intercept)


def diagnostics_header(k: int) -> list[str]:
    cols = ["t"] + [f"z{i}" for i in range(k)]
    cols += [f"cov_{i}_{j}" for i in range(k) for j in range(i + 1, k)]
    return cols


def latent_diagnostics(learner, ds) -> dict:
    """Per-feature variance, pairwise covariance and the eval-split latents.

    Returns ``{"header", "rows", "variance", "covariance"}``. ``rows`` has one
    row per eval step: the time index, the k latent values (the scatter
    columns; any pair (z_i, z_j) is read from them), then the centred product
    (z_i - mean_i)(z_j - mean_j) for every i < j, whose column mean is the
    pairwise covariance.
    """
    Z = learner.encode(ds.X_eval)
    k = Z.shape[1]
    Zc = Z - Z.mean(axis=0)
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    prods = np.column_stack([Zc[:, i] * Zc[:, j] for i, j in pairs]) if pairs else np.empty((len(Z), 0))
    t = np.arange(ds.split, ds.split + len(Z))[:, None]
    rows = np.hstack([t, Z, prods])
    cov = Zc.T @ Zc / len(Z)
    return {"header": diagnostics_header(k), "rows": rows, "variance": np.diag(cov).copy(), "covariance": cov}


def write_diagnostics_csv(diag: dict, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(diag["header"]) + "\n")
        for row in diag["rows"]:
            fh.write(str(int(row[0])) + "," + ",".join(repr(float(v)) for v in row[1:]) + "\n")
