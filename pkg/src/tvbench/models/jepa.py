"""Latent-space predictive learners: JEPA with an EMA teacher, and the
predictive encoder trained by alternately freezing encoder and predictor."""

from __future__ import annotations

import numpy as np

from ..traincore import Layer, Network, OptState, backward, ema_update, forward, mse_loss
from .base import Batch, Learner
from .linear import random_unit_rows


def identity_net(k: int) -> Network:
    return Network([Layer(np.eye(k), np.zeros(k))])


class JEPA(Learner):
    """Student encoder + predictor regress onto EMA-teacher targets of x_{t+1}."""

    kind = "jepa"
    uses_pairs = True

    def build(self, n_x: int) -> None:
        k = self.latent_dim
        self.enc_s = Network.mlp(n_x, k, self.rng, hidden=self.cfg.hidden)
        self.enc_t = self.enc_s.copy()
        self.pred = identity_net(k)

    def params(self):
        return self.enc_s.params() + self.pred.params()

    def param_names(self):
        return ([f"enc_s.{i}" for i in range(len(self.enc_s.params()))]
                + [f"pred.{i}" for i in range(len(self.pred.params()))])

    def touch(self) -> None:
        self.enc_s.touch()
        self.pred.touch()

    def loss_and_grads(self, batch: Batch):
        zs, cache_s = forward(self.enc_s, batch.x)
        zh, cache_p = forward(self.pred, zs)
        zt = self.enc_t(batch.x_next)  # target: no gradient path
        loss, dzh = mse_loss(zh, zt)
        tape_p, dzs = backward(self.pred, cache_p, dzh)
        tape_s, _ = backward(self.enc_s, cache_s, dzs)
        return loss, tape_s.grads + tape_p.grads

    def after_step(self) -> None:
        ema_update(self.enc_t, self.enc_s, self.cfg.tau)

    def _encode(self, X):
        return self.enc_s(X)


class PredEnc(Learner):
    """Random-projection encoder refined by alternating predictor/encoder phases.

    No reconstruction term. With ``target_stopgrad`` the target-side encoding
    of x_{t+1} is treated as a constant while the encoder trains.
    """

    kind = "predenc"
    uses_pairs = True

    def build(self, n_x: int) -> None:
        k = self.latent_dim
        # first draw matches RandProj with the same seed
        self.enc = Network([Layer(random_unit_rows(self.rng, k, n_x), None)])
        self.pred = identity_net(k)

    def params(self):
        return self.enc.params() + self.pred.params()

    def param_names(self):
        return ["enc.0", "pred.0", "pred.1"]

    def touch(self) -> None:
        self.enc.touch()
        self.pred.touch()

    def loss_and_grads(self, batch: Batch):
        z, cache_z = forward(self.enc, batch.x)
        zh, cache_p = forward(self.pred, z)
        zn, cache_n = forward(self.enc, batch.x_next)
        loss, dzh = mse_loss(zh, zn)
        tape_p, dz = backward(self.pred, cache_p, dzh)
        tape_e, _ = backward(self.enc, cache_z, dz)
        if not self.cfg.target_stopgrad:
            tape_n, _ = backward(self.enc, cache_n, -dzh)
            tape_e += tape_n
        return loss, tape_e.grads + tape_p.grads

    def train(self, ds) -> None:
        rounds = self.cfg.rounds
        if rounds <= 0:
            return
        phase_steps = max(1, self.cfg.steps // (2 * rounds))
        n_enc = len(self.enc.params())
        enc_idx = list(range(n_enc))
        pred_idx = list(range(n_enc, len(self.params())))
        opt_p = OptState(lr=self.cfg.lr, rule=self.cfg.optimizer)
        opt_e = OptState(lr=self.cfg.lr, rule=self.cfg.optimizer)
        for _ in range(rounds):
            self.run_steps(ds, phase_steps, active=pred_idx, opt=opt_p)
            self.run_steps(ds, phase_steps, active=enc_idx, opt=opt_e)

    def _encode(self, X):
        return self.enc(X)
