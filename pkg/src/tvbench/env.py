"""The TV-series testbed: a rotating, contracting signal state observed
through a random linear mixture together with an AR(1) distractor."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import (
    PURPOSE_DISTRACTOR,
    PURPOSE_MIXING,
    PURPOSE_OBS_NOISE,
    PURPOSE_SIGNAL,
    Rng,
    derive_seed,
    gauss_sample,
)

DISTRACTOR_DECAY = 0.9


@dataclass(frozen=True)
class EnvParams:
    n_s: int = 4
    n_d: int = 4
    n_x: int = 20
    alpha: float = 0.99
    omega: float = 0.3
    sigma_w: float = 0.1
    sigma_v: float = 0.1
    sigma_e: float = 0.05
    sigma: float = 0.0
    T: int = 10_000
    train_frac: float = 0.8
    seed: int = 0
    # draw s_0, d_0 from the stationary law; False starts both at zero
    stationary_init: bool = True

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_s % 2 or self.n_d % 2 or self.n_s <= 0 or self.n_d <= 0:
            raise ValueError("n_s and n_d must be positive and even")
        if self.n_x <= 0:
            raise ValueError("n_x must be positive")
        for name in ("sigma_w", "sigma_v", "sigma_e", "sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 < self.train_frac < 1:
            raise ValueError(f"train_frac must lie in (0, 1), got {self.train_frac}")
        split = round(self.train_frac * self.T)
        if not 0 < split < self.T:
            raise ValueError(f"T={self.T} with train_frac={self.train_frac} leaves an empty split")

    @property
    def signal_var(self) -> float:
        return self.sigma_w**2 / (1 - self.alpha**2)

    @property
    def distractor_var(self) -> float:
        return self.sigma_v**2 / (1 - DISTRACTOR_DECAY**2)

    @property
    def split(self) -> int:
        return round(self.train_frac * self.T)


@dataclass(frozen=True)
class MixingMaps:
    C: np.ndarray
    D: np.ndarray


@dataclass
class Dataset:
    S: np.ndarray
    Dd: np.ndarray
    X: np.ndarray
    split: int
    snr_db: float
    params: EnvParams
    maps: MixingMaps

    @property
    def X_train(self) -> np.ndarray:
        return self.X[: self.split]

    @property
    def X_eval(self) -> np.ndarray:
        return self.X[self.split :]

    @property
    def S_train(self) -> np.ndarray:
        return self.S[: self.split]

    @property
    def S_eval(self) -> np.ndarray:
        return self.S[self.split :]

    def checksum(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for arr in (self.S, self.Dd, self.X):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


def make_rotation(n: int, omega: float) -> np.ndarray:
    if n % 2:
        raise ValueError(f"rotation size must be even, got {n}")
    c, s = math.cos(omega), math.sin(omega)
    Q = np.zeros((n, n))
    for i in range(0, n, 2):
        Q[i : i + 2, i : i + 2] = [[c, -s], [s, c]]
    return Q


def _unit_columns(rng: Rng, rows: int, cols: int) -> np.ndarray:
    M = np.empty((rows, cols))
    for j in range(cols):
        col = rng.normal(rows)
        while not np.any(col):
            col = rng.normal(rows)
        M[:, j] = col / np.linalg.norm(col)
    return M


def make_mixing(params: EnvParams, rng: Rng) -> MixingMaps:
    C = _unit_columns(rng, params.n_x, params.n_s)
    D = _unit_columns(rng, params.n_x, params.n_d)
    return MixingMaps(C=C, D=D)


def step_signal(s: np.ndarray, A: np.ndarray, rng: Rng, sigma_w: float) -> np.ndarray:
    return A @ s + gauss_sample(rng, len(s), sigma_w)


def step_distractor(d: np.ndarray, rng: Rng, sigma_v: float) -> np.ndarray:
    return DISTRACTOR_DECAY * d + gauss_sample(rng, len(d), sigma_v)


def observe(s, d, maps: MixingMaps, sigma: float, rng: Rng, sigma_e: float) -> np.ndarray:
    return maps.C @ s + maps.D @ (sigma * np.asarray(d)) + gauss_sample(rng, maps.C.shape[0], sigma_e)


def _rollout(x0: np.ndarray, M: np.ndarray, noise: np.ndarray) -> np.ndarray:
    # x_{t+1} = M x_t + noise_t
    out = np.empty((noise.shape[0] + 1, x0.size))
    out[0] = x0
    Mt = M.T
    for t in range(noise.shape[0]):
        out[t + 1] = out[t] @ Mt + noise[t]
    return out


def generate_dataset(params: EnvParams) -> Dataset:
    """Roll one trajectory of length T, fully determined by ``params``.

    Independent streams are used for the mixing maps, the signal noise, the
    distractor noise and the observation noise, so changing ``sigma`` only
    rescales the distractor term and leaves every draw unchanged.
    """
    p = params
    maps = make_mixing(p, Rng(derive_seed(p.seed, PURPOSE_MIXING)))
    rs = Rng(derive_seed(p.seed, PURPOSE_SIGNAL))
    rd = Rng(derive_seed(p.seed, PURPOSE_DISTRACTOR))
    re = Rng(derive_seed(p.seed, PURPOSE_OBS_NOISE))

    if p.stationary_init:
        s0 = gauss_sample(rs, p.n_s, math.sqrt(p.signal_var))
        d0 = gauss_sample(rd, p.n_d, math.sqrt(p.distractor_var))
    else:
        s0, d0 = np.zeros(p.n_s), np.zeros(p.n_d)
    A = p.alpha * make_rotation(p.n_s, p.omega)
    S = _rollout(s0, A, gauss_sample(rs, (p.T - 1, p.n_s), p.sigma_w))
    Dd = _rollout(d0, DISTRACTOR_DECAY * np.eye(p.n_d), gauss_sample(rd, (p.T - 1, p.n_d), p.sigma_v))
    E = gauss_sample(re, (p.T, p.n_x), p.sigma_e)
    X = S @ maps.C.T + (p.sigma * Dd) @ maps.D.T + E

    ds = Dataset(S=S, Dd=Dd, X=X, split=p.split, snr_db=0.0, params=p, maps=maps)
    ds.snr_db = compute_snr_db(ds, maps, p)
    return ds


def _total_var(Y: np.ndarray) -> float:
    return float(np.sum(np.var(Y, axis=0, ddof=1)))


def compute_snr_db(dataset: Dataset, maps: MixingMaps, params: EnvParams) -> float:
    """Empirical SNR in dB; returns ``inf`` when there is no noise term.

    The observation-noise contribution n_x * sigma_e**2 is added analytically
    because the noise draws themselves are not stored.
    """
    if dataset.S.shape[0] < 2:
        raise ValueError("need at least two time steps")
    signal = _total_var(dataset.S @ maps.C.T)
    noise = _total_var((params.sigma * dataset.Dd) @ maps.D.T) + params.n_x * params.sigma_e**2
    if noise == 0:
        return math.inf
    if signal == 0:
        return -math.inf
    return 10 * math.log10(signal / noise)


def analytic_snr_db(params: EnvParams) -> float:
    p = params
    noise = p.n_d * p.sigma**2 * p.distractor_var + p.n_x * p.sigma_e**2
    if noise == 0:
        return math.inf
    return 10 * math.log10(p.n_s * p.signal_var / noise)


# --- export -------------------------------------------------------------

def save_dataset(ds: Dataset, path) -> Path:
    """Write ``ds`` as an ``.npz`` archive.

    Arrays: ``S`` (T x n_s), ``Dd`` (T x n_d), ``X`` (T x n_x), ``C``, ``D``.
    ``header`` is a JSON string with ``format``, ``T``, ``split``, ``snr_db``,
    the dims and the full ``params`` echo (including ``seed``).
    """
    path = Path(path)
    header = {
        "format": "tvbench-dataset/1",
        "T": int(ds.S.shape[0]),
        "n_s": ds.params.n_s,
        "n_d": ds.params.n_d,
        "n_x": ds.params.n_x,
        "split": ds.split,
        "snr_db": "inf" if math.isinf(ds.snr_db) else ds.snr_db,
        "seed": ds.params.seed,
        "params": dataclasses.asdict(ds.params),
    }
    with open(path, "wb") as fh:
        np.savez(fh, S=ds.S, Dd=ds.Dd, X=ds.X, C=ds.maps.C, D=ds.maps.D,
                 header=np.array(json.dumps(header, sort_keys=True)))
    return path


def load_dataset(path) -> Dataset:
    with np.load(path) as z:
        header = json.loads(str(z["header"]))
        params = EnvParams(**header["params"])
        snr = header["snr_db"]
        return Dataset(S=z["S"], Dd=z["Dd"], X=z["X"], split=header["split"],
                       snr_db=math.inf if snr == "inf" else float(snr), params=params,
                       maps=MixingMaps(C=z["C"], D=z["D"]))


def save_csv(ds: Dataset, path) -> Path:
    """CSV with columns ``t,split,s0..,x0..``; ``split`` is ``train`` or ``eval``."""
    path = Path(path)
    n_s, n_x = ds.S.shape[1], ds.X.shape[1]
    with open(path, "w") as fh:
        fh.write(",".join(["t", "split"] + [f"s{i}" for i in range(n_s)] + [f"x{i}" for i in range(n_x)]) + "\n")
        for t in range(ds.S.shape[0]):
            tag = "train" if t < ds.split else "eval"
            vals = ",".join(repr(float(v)) for v in np.concatenate([ds.S[t], ds.X[t]]))
            fh.write(f"{t},{tag},{vals}\n")
    return path
