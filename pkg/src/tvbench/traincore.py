"""Small differentiable kernel: affine/tanh layer stacks with hand-written
backward passes, the loss primitives, Adam/SGD, and EMA tracking.

Everything works on batches (rows are samples); a 1-D input is treated as a
batch of one and the matching outputs are returned 1-D.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import NumericError, Rng, ShapeError

ACTIVATIONS = ("identity", "tanh")


@dataclass
class Layer:
    W: np.ndarray  # out x in
    b: np.ndarray | None
    act: str = "identity"

    def __post_init__(self):
        if self.act not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.act!r}")


class Network:
    """A chain of affine layers, each followed by its activation."""

    def __init__(self, layers: list[Layer]):
        for prev, nxt in zip(layers, layers[1:]):
            if prev.W.shape[0] != nxt.W.shape[1]:
                raise ShapeError(f"layer shapes do not chain: {prev.W.shape} -> {nxt.W.shape}")
        self.layers = layers
        self.version = 0

    @classmethod
    def init(cls, sizes: list[int], rng: Rng, acts: list[str] | None = None, bias: bool = True) -> "Network":
        """Weights ~ N(0, 1/fan_in), biases zero."""
        acts = acts or ["identity"] * (len(sizes) - 1)
        layers = []
        for n_in, n_out, act in zip(sizes, sizes[1:], acts):
            W = rng.normal((n_out, n_in)) / np.sqrt(n_in)
            layers.append(Layer(W, np.zeros(n_out) if bias else None, act))
        return cls(layers)

    @classmethod
    def mlp(cls, n_in: int, n_out: int, rng: Rng, hidden: int = 0, bias: bool = True) -> "Network":
        if hidden:
            return cls.init([n_in, hidden, n_out], rng, ["tanh", "identity"], bias)
        return cls.init([n_in, n_out], rng, ["identity"], bias)

    @property
    def in_dim(self) -> int:
        return self.layers[0].W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].W.shape[0]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.append(layer.W)
            if layer.b is not None:
                out.append(layer.b)
        return out

    def copy(self) -> "Network":
        return Network(copy.deepcopy(self.layers))

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, theta: np.ndarray) -> None:
        i = 0
        for p in self.params():
            p[...] = theta[i : i + p.size].reshape(p.shape)
            i += p.size
        self.touch()

    def touch(self) -> None:
        self.version += 1

    def arch(self) -> list[dict]:
        return [{"shape": list(l.W.shape), "bias": l.b is not None, "act": l.act} for l in self.layers]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return forward(self, X)[0]


@dataclass
class Cache:
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    squeeze: bool
    version: int


@dataclass
class GradTape:
    grads: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: Network) -> "GradTape":
        return cls([np.zeros_like(p) for p in net.params()])

    def __iadd__(self, other: "GradTape") -> "GradTape":
        for g, h in zip(self.grads, other.grads):
            g += h
        return self

    def zero(self) -> None:
        for g in self.grads:
            g[...] = 0.0

    def flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.grads])


def _act(a: str, h: np.ndarray) -> np.ndarray:
    return np.tanh(h) if a == "tanh" else h


def forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, Cache]:
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    X = x[None, :] if squeeze else x
    if X.shape[1] != net.in_dim:
        raise ShapeError(f"input width {X.shape[1]} != network in_dim {net.in_dim}")
    inputs, pre = [], []
    for layer in net.layers:
        inputs.append(X)
        H = X @ layer.W.T
        if layer.b is not None:
            H = H + layer.b
        pre.append(H)
        X = _act(layer.act, H)
    return (X[0] if squeeze else X), Cache(inputs, pre, squeeze, net.version)


def backward(net: Network, cache: Cache, dy: np.ndarray) -> tuple[GradTape, np.ndarray]:
    if cache.version != net.version or len(cache.inputs) != len(net.layers):
        raise RuntimeError("stale cache: network changed since forward")
    G = np.asarray(dy, dtype=float)
    if cache.squeeze:
        G = G[None, :]
    grads: list[np.ndarray] = []
    for layer, X, H in zip(reversed(net.layers), reversed(cache.inputs), reversed(cache.pre)):
        if layer.act == "tanh":
            G = G * (1.0 - np.tanh(H) ** 2)
        if layer.b is not None:
            grads.append(G.sum(axis=0))
        grads.append(G.T @ X)
        G = G @ layer.W
    grads.reverse()
    return GradTape(grads), (G[0] if cache.squeeze else G)


# --- losses ---------------------------------------------------------------

def mse_loss(y: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over every entry; gradient 2(y - t)/size."""
    y, t = np.asarray(y, dtype=float), np.asarray(t, dtype=float)
    if y.shape != t.shape:
        raise ShapeError(f"mse shapes differ: {y.shape} vs {t.shape}")
    diff = y - t
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def kl_diag_gauss(mu: np.ndarray, logvar: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over dims, averaged over rows."""
    mu, logvar = np.asarray(mu, dtype=float), np.asarray(logvar, dtype=float)
    n = mu.shape[0] if mu.ndim == 2 else 1
    ev = np.exp(logvar)
    kl = 0.5 * np.sum(mu * mu + ev - 1.0 - logvar) / n
    return float(kl), mu / n, 0.5 * (ev - 1.0) / n


def reparam_sample(mu: np.ndarray, logvar: np.ndarray, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    """Return ``z = mu + exp(logvar/2) * eps`` and ``eps``.

    Backward: dL/dmu = dL/dz, dL/dlogvar = dL/dz * 0.5 * exp(logvar/2) * eps.
    """
    eps = rng.normal(np.shape(mu))
    return mu + np.exp(0.5 * logvar) * eps, eps


# --- optimisation -----------------------------------------------------------

@dataclass
class OptState:
    """Per-parameter optimiser state. ``rule`` is ``adam`` or ``sgd``."""

    lr: float = 1e-3
    rule: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.rule not in ("adam", "sgd"):
            raise ValueError(f"unknown optimiser rule {self.rule!r}")

    def apply(self, params: list[np.ndarray], grads: list[np.ndarray], names: list[str] | None = None,
              clip_norm: float = 0.0) -> bool:
        """Update ``params`` in place; returns True when the gradient was clipped."""
        g = np.concatenate([g.ravel() for g in grads])
        if not np.isfinite(g).all():
            bad = next(i for i, b in enumerate(grads) if not np.all(np.isfinite(b)))
            raise NumericError(f"non-finite gradient in {names[bad] if names else f'block {bad}'}")
        clipped = False
        if clip_norm:
            norm = np.sqrt(g @ g)
            if norm > clip_norm:
                g *= clip_norm / norm
                clipped = True
        if not self.m:
            self.m = [np.zeros(g.size)]
            self.v = [np.zeros(g.size)]
        self.step += 1
        if self.lr == 0:
            return clipped
        if self.rule == "sgd":
            u = self.lr * g
        else:
            m, v = self.m[0], self.v[0]
            b1, b2 = self.beta1, self.beta2
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            c2 = np.sqrt(1.0 - b2**self.step)
            u = (self.lr * c2 / (1.0 - b1**self.step)) * m / (np.sqrt(v) + self.eps * c2)
        i = 0
        for p in params:
            p -= u[i : i + p.size].reshape(p.shape)
            i += p.size
        return clipped


def sgd_step(net: Network, tape: GradTape, opt: OptState) -> Network:
    opt.apply(net.params(), tape.grads, [f"layer{i}" for i in range(len(tape.grads))])
    net.touch()
    return net


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> bool:
    """Rescale ``grads`` in place to global norm ``max_norm``; True if clipped."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm:
        for g in grads:
            g *= max_norm / total
        return True
    return False


def ema_update(teacher: Network, student: Network, tau: float) -> Network:
    if not 0 <= tau <= 1:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if teacher.arch() != student.arch():
        raise ShapeError("teacher and student architectures differ")
    for pt, ps in zip(teacher.params(), student.params()):
        pt *= tau
        pt += (1.0 - tau) * ps
    teacher.touch()
    return teacher


class DegenerateRowError(ValueError):
    def __init__(self, rows):
        self.rows = list(rows)
        super().__init__(f"zero rows cannot be normalised: {self.rows}")


def renorm_rows_unit(W: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(W, axis=1)
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise DegenerateRowError(bad)
    return W / norms[:, None]


# --- checkpoints ------------------------------------------------------------

def save_checkpoint(path, nets: dict[str, Network], arrays: dict[str, np.ndarray] | None = None,
                    meta: dict | None = None) -> Path:
    """``.npz`` with one entry per parameter (``<net>.<i>``) plus a JSON ``meta``.

    ``meta`` holds ``format``, ``arch`` (per net: layer shapes, bias flag,
    activation) and whatever the caller passes (kind, config echo, seed).
    """
    path = Path(path)
    payload: dict[str, np.ndarray] = {}
    arch = {}
    for name, net in nets.items():
        arch[name] = net.arch()
        for i, p in enumerate(net.params()):
            payload[f"{name}.{i}"] = p
    for name, arr in (arrays or {}).items():
        payload[f"array.{name}"] = np.asarray(arr)
    info = {"format": "tvbench-checkpoint/1", "arch": arch, **(meta or {})}
    payload["meta"] = np.array(json.dumps(info, sort_keys=True, default=str))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)
    return path


def load_checkpoint(path) -> tuple[dict[str, Network], dict[str, np.ndarray], dict]:
    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        nets = {}
        for name, layers in meta["arch"].items():
            built, i = [], 0
            for spec in layers:
                W = z[f"{name}.{i}"]
                i += 1
                b = None
                if spec["bias"]:
                    b = z[f"{name}.{i}"]
                    i += 1
                built.append(Layer(W, b, spec["act"]))
            nets[name] = Network(built)
        arrays = {k[len("array."):]: z[k] for k in z.files if k.startswith("array.")}
    return nets, arrays, meta
