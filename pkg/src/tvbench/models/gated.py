"""Gated predictive autoencoder.

An over-wide encoder (m features, unit-norm projection rows) is trained to
reconstruct x_t from all m features. A gate with logits g picks the top-k
features; only those are fed to the predictor, which forecasts every
feature's next value. Prediction errors are weighted by the soft gate
k * sigmoid(g) / sum(sigmoid(g)), so the logits drift toward the features
that are easiest to forecast from the selected set.

With ``gate_forward="hard"`` (default) the loss weights the selected
features by 1 and the rest by 0, while the logits receive the soft-gate
gradient (straight-through). ``"soft"`` uses the soft weights in the
forward pass too, which makes the whole objective differentiable.

``pred_norm`` picks how prediction errors are scaled: ``"none"`` (raw
squared error), ``"var"`` (each feature's error over its target variance)
or ``"white"`` (default; error of the selected block measured in whitened
target coordinates, hard gate only). The logits always see the per-feature
errors. Without whitening, the selected rows tend to drift onto nearly the
same direction, which keeps the loss low but loses most of the state.
"""

from __future__ import annotations

import numpy as np

from ..traincore import DegenerateRowError, Layer, Network, backward, forward, mse_loss, renorm_rows_unit
from .base import Batch, Learner
from .linear import random_unit_rows


def top_k(logits: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest logits, ties to the lowest index, sorted."""
    order = np.lexsort((np.arange(len(logits)), -logits))
    return np.sort(order[:k])


def soft_gate(logits: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Gate weights w = k * sig(g) / sum(sig(g)) and the Jacobian dw/dg."""
    sig = 1.0 / (1.0 + np.exp(-logits))
    total = sig.sum()
    w = k * sig / total
    dsig = sig * (1.0 - sig)
    # dw_i/dg_j = k * (delta_ij dsig_j / total - sig_i dsig_j / total^2)
    jac = k * (np.diag(dsig) / total - np.outer(sig, dsig) / total**2)
    return w, jac


class GatedPredAE(Learner):
    kind = "gatedpredae"
    uses_pairs = True

    @property
    def width(self) -> int:
        return self.cfg.gate_width

    def build(self, n_x: int) -> None:
        m, k = self.width, self.latent_dim
        if m <= k:
            raise ValueError(f"gate_width ({m}) must exceed latent_dim ({k})")
        if self.cfg.pred_norm not in ("none", "var", "white"):
            raise ValueError(f"pred_norm must be none, var or white, got {self.cfg.pred_norm!r}")
        if self.cfg.pred_norm == "white" and self.cfg.gate_forward != "hard":
            raise ValueError("pred_norm = white needs gate_forward = hard")
        self.enc = Network([Layer(random_unit_rows(self.rng, m, n_x), None)])
        self.dec = Network.mlp(m, n_x, self.rng, hidden=self.cfg.hidden)
        self.pred = Network([Layer(np.eye(m), np.zeros(m))])
        self.logits = np.zeros(m)

    @property
    def selected(self) -> np.ndarray:
        return top_k(self.logits, self.latent_dim)

    def mask(self) -> np.ndarray:
        h = np.zeros(self.width)
        h[self.selected] = 1.0
        return h

    def params(self):
        return self.enc.params() + self.dec.params() + self.pred.params() + [self.logits]

    def param_names(self):
        return (["enc.0"] + [f"dec.{i}" for i in range(len(self.dec.params()))]
                + ["pred.0", "pred.1", "gate"])

    def touch(self) -> None:
        for net in (self.enc, self.dec, self.pred):
            net.touch()

    def loss_and_grads(self, batch: Batch):
        k, lam = self.latent_dim, self.cfg.lambda_pred
        h = self.mask()
        w_soft, jac = soft_gate(self.logits, k)
        # straight-through: hard top-k weights forward, soft-gate Jacobian backward
        w = h if self.cfg.gate_forward == "hard" else w_soft

        z0, cache_0 = forward(self.enc, batch.x)
        z1, cache_1 = forward(self.enc, batch.x_next)
        xh, cache_d = forward(self.dec, z0)
        rec, dxh = mse_loss(xh, batch.x)
        zp, cache_p = forward(self.pred, z0 * h)
        diff = zp - z1
        B = diff.shape[0]
        err = np.mean(diff * diff, axis=0)  # per-feature squared error
        dzp_raw = 2.0 * diff / B  # d err / d zp
        dz1_raw = -dzp_raw
        if self.cfg.pred_norm != "none":
            # error relative to the target feature's batch variance
            c1 = z1 - z1.mean(axis=0)
            var = np.mean(c1 * c1, axis=0) + 1e-12
            ratio = err / var
            dzp_raw = dzp_raw / var
            dz1_raw = dz1_raw / var - (2.0 * ratio / (B * var)) * c1
            err = ratio
        if self.cfg.pred_norm == "white":
            pred_loss, dzp, dz1 = self._whitened(diff, z1, lam)
        else:
            pred_loss = float(w @ err) / k
            dzp = (lam / k) * dzp_raw * w
            dz1 = (lam / k) * dz1_raw * w
        tape_d, dz0 = backward(self.dec, cache_d, dxh)
        tape_p, dzin = backward(self.pred, cache_p, dzp)
        dz0 = dz0 + dzin * h
        # both time steps share the encoder and both receive gradient
        tape_e, _ = backward(self.enc, cache_0, dz0)
        tape_e1, _ = backward(self.enc, cache_1, dz1)
        tape_e += tape_e1
        g_logits = (lam / k) * (jac.T @ err)
        loss = rec + lam * pred_loss
        return loss, tape_e.grads + tape_d.grads + tape_p.grads + [g_logits]

    def _whitened(self, diff, z1, lam):
        """Prediction error of the selected block in whitened target coordinates.

        L = tr(P M) / k with M the error second moment and P the inverse
        target covariance over the selected features. Unlike per-feature
        normalisation, this is invariant to any invertible remixing of the
        selected features, so near-duplicate features expose their
        unpredictable residual directions instead of hiding them.
        """
        k, B = self.latent_dim, diff.shape[0]
        sel = self.selected
        d = diff[:, sel]
        c = z1[:, sel] - z1[:, sel].mean(axis=0)
        cov = c.T @ c / B
        cov += 1e-9 * (np.trace(cov) / k + 1e-12) * np.eye(k)
        P = np.linalg.inv(cov)
        M = d.T @ d / B
        loss = float(np.sum(P * M)) / k
        dzp = np.zeros_like(diff)
        dz1 = np.zeros_like(diff)
        g_d = (2.0 * lam / (B * k)) * d @ P
        dzp[:, sel] = g_d
        dz1[:, sel] = -g_d - (2.0 * lam / (B * k)) * c @ (P @ M @ P)
        return loss, dzp, dz1

    def after_step(self) -> None:
        W = self.enc.layers[0].W
        try:
            W[...] = renorm_rows_unit(W)
        except DegenerateRowError as exc:
            for r in exc.rows:
                W[r] = self.rng.normal(W.shape[1])
            self.diag.reinit_rows += len(exc.rows)
            W[...] = renorm_rows_unit(W)
        self.enc.touch()

    def features(self, X: np.ndarray) -> np.ndarray:
        """All m internal features."""
        return self.enc(X)

    def _encode(self, X):
        return self.enc(X)[:, self.selected]
