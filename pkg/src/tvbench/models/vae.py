"""Reconstruction-based learners: VAE, next-step PredVAE, and the latent
prediction variant that exhibits latent shrinkage."""

from __future__ import annotations

import numpy as np

from ..traincore import Network, backward, forward, kl_diag_gauss, mse_loss
from .base import Batch, Learner


class VAE(Learner):
    kind = "vae"

    @property
    def n_eps(self) -> int:  # type: ignore[override]
        return self.latent_dim

    def build(self, n_x: int) -> None:
        k, h = self.latent_dim, self.cfg.hidden
        self.enc = Network.mlp(n_x, 2 * k, self.rng, hidden=h)
        self.dec = Network.mlp(k, n_x, self.rng, hidden=h)

    def nets(self) -> list[Network]:
        return [self.enc, self.dec]

    def params(self):
        return [p for net in self.nets() for p in net.params()]

    def param_names(self):
        return [f"{name}.{i}" for name, net in zip(self._net_names(), self.nets())
                for i in range(len(net.params()))]

    def _net_names(self) -> list[str]:
        return ["enc", "dec", "pred"][: len(self.nets())]

    def touch(self) -> None:
        for net in self.nets():
            net.touch()

    def _encode(self, X):
        return self.enc(X)[:, : self.latent_dim]

    # shared pieces ---------------------------------------------------------
    def _posterior(self, x, eps):
        k = self.latent_dim
        h, cache = forward(self.enc, x)
        mu, logvar = h[:, :k], h[:, k:]
        std = np.exp(0.5 * logvar)
        return mu, logvar, mu + std * eps, std, cache

    def _enc_backward(self, cache, dz, dlogvar_extra, std, eps, dmu_extra=0.0):
        # dz flows to mu directly and to logvar through the reparameterisation
        dh = np.hstack([dz + dmu_extra, dz * 0.5 * std * eps + dlogvar_extra])
        tape, _ = backward(self.enc, cache, dh)
        return tape.grads

    def loss_and_grads(self, batch: Batch):
        beta = self.cfg.beta
        mu, logvar, z, std, cache_e = self._posterior(batch.x, batch.eps)
        xh, cache_d = forward(self.dec, z)
        rec, dxh = mse_loss(xh, batch.x)
        kl, dmu_kl, dlv_kl = kl_diag_gauss(mu, logvar)
        tape_d, dz = backward(self.dec, cache_d, dxh)
        g_enc = self._enc_backward(cache_e, dz, beta * dlv_kl, std, batch.eps, beta * dmu_kl)
        return rec + beta * kl, g_enc + tape_d.grads


class PredVAE(VAE):
    """VAE plus reconstruction of x_{t+1} from the predicted next latent."""

    kind = "predvae"
    uses_pairs = True

    def build(self, n_x: int) -> None:
        super().build(n_x)
        self.pred = Network.mlp(self.latent_dim, self.latent_dim, self.rng, hidden=self.cfg.hidden)

    def nets(self):
        return [self.enc, self.dec, self.pred]

    def loss_and_grads(self, batch: Batch):
        beta, lam = self.cfg.beta, self.cfg.lambda_pred
        mu, logvar, z, std, cache_e = self._posterior(batch.x, batch.eps)
        xh, cache_d = forward(self.dec, z)
        rec, dxh = mse_loss(xh, batch.x)
        kl, dmu_kl, dlv_kl = kl_diag_gauss(mu, logvar)
        zp, cache_p = forward(self.pred, z)
        xp, cache_dp = forward(self.dec, zp)
        pr, dxp = mse_loss(xp, batch.x_next)

        tape_d, dz = backward(self.dec, cache_d, dxh)
        tape_dp, dzp = backward(self.dec, cache_dp, lam * dxp)
        tape_p, dz_from_pred = backward(self.pred, cache_p, dzp)
        tape_d += tape_dp
        g_enc = self._enc_backward(cache_e, dz + dz_from_pred, beta * dlv_kl, std, batch.eps, beta * dmu_kl)
        return rec + beta * kl + lam * pr, g_enc + tape_d.grads + tape_p.grads


class LatentPredVAE(VAE):
    """Reconstruct x_{t+1} from its own latent and predict z_{t+1} from z_t.

    Both latent arguments of the prediction term receive gradient, which lets
    the encoder shrink z to cheapen prediction; ``diag.z_norm`` tracks it.
    """

    kind = "latentpredvae"
    uses_pairs = True

    def build(self, n_x: int) -> None:
        super().build(n_x)
        self.pred = Network.mlp(self.latent_dim, self.latent_dim, self.rng, hidden=self.cfg.hidden)

    def nets(self):
        return [self.enc, self.dec, self.pred]

    def loss_and_grads(self, batch: Batch):
        beta, lam = self.cfg.beta, self.cfg.lambda_pred
        mu0, lv0, z0, std0, cache0 = self._posterior(batch.x, batch.eps)
        mu1, lv1, z1, std1, cache1 = self._posterior(batch.x_next, batch.eps_next)
        xh, cache_d = forward(self.dec, z1)
        rec, dxh = mse_loss(xh, batch.x_next)
        kl0, dmu0_kl, dlv0_kl = kl_diag_gauss(mu0, lv0)
        kl1, dmu1_kl, dlv1_kl = kl_diag_gauss(mu1, lv1)
        zp, cache_p = forward(self.pred, z0)
        pr, dzp = mse_loss(zp, z1)

        tape_d, dz1 = backward(self.dec, cache_d, dxh)
        tape_p, dz0 = backward(self.pred, cache_p, lam * dzp)
        dz1 = dz1 - lam * dzp
        b = 0.5 * beta
        g0 = self._enc_backward(cache0, dz0, b * dlv0_kl, std0, batch.eps, b * dmu0_kl)
        g1 = self._enc_backward(cache1, dz1, b * dlv1_kl, std1, batch.eps_next, b * dmu1_kl)
        g_enc = [a + c for a, c in zip(g0, g1)]
        loss = rec + b * (kl0 + kl1) + lam * pr
        return loss, g_enc + tape_d.grads + tape_p.grads
