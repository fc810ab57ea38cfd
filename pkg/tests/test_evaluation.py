import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvbench.env import EnvParams, generate_dataset
from tvbench.evaluation import (
    apply_probe,
    diagnostics_header,
    fit_probe,
    latent_diagnostics,
    probe_eval,
    probe_latents,
    r2_score,
    write_diagnostics_csv,
)
from tvbench.models import ModelConfig, fit_learner
from tvbench.numerics import Rng


def test_r2_perfect():
    S = Rng(0).normal((10, 3))
    agg, per = r2_score(S, S)
    assert agg == 1.0 and np.all(per == 1.0)


def test_r2_mean_predictor_is_zero():
    S = Rng(1).normal((10, 2))
    agg, _ = r2_score(np.tile(S.mean(axis=0), (10, 1)), S)
    assert agg == pytest.approx(0.0, abs=1e-12)


def test_r2_negated_targets():
    # S_hat = -S on zero-mean data: SSE = 4 SST, so R^2 = -3
    S = np.array([[1.0], [-1.0], [2.0], [-2.0]])
    assert r2_score(-S, S)[0] == pytest.approx(-3.0)


def test_r2_is_uniform_average():
    S = np.array([[1.0, 1.0], [-1.0, -1.0]])
    S_hat = np.array([[1.0, 0.0], [-1.0, 0.0]])
    agg, per = r2_score(S_hat, S)
    np.testing.assert_allclose(per, [1.0, 0.0])
    assert agg == 0.5


def test_r2_zero_variance_dim_excluded_with_warning():
    S = np.array([[1.0, 5.0], [-1.0, 5.0], [0.0, 5.0]])
    with pytest.warns(RuntimeWarning):
        agg, per = r2_score(S, S)
    assert math.isnan(per[1]) and agg == 1.0


def test_r2_shape_errors():
    with pytest.raises(ValueError):
        r2_score(np.zeros((3, 2)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        r2_score(np.zeros((1, 2)), np.zeros((1, 2)))


def test_probe_exact_linear_latents():
    rng = Rng(2)
    S = rng.normal((200, 4))
    A = rng.normal((4, 4))
    res = probe_latents(S[:150] @ A.T, S[:150], S[150:] @ A.T, S[150:])
    assert res.r2_eval == pytest.approx(1.0, abs=1e-10)


def test_probe_intercept_handles_offset():
    rng = Rng(3)
    S = rng.normal((200, 2))
    Z = S + 5.0
    assert probe_latents(Z[:150], S[:150], Z[150:], S[150:], intercept=True).r2_eval == pytest.approx(1.0)
    assert probe_latents(Z[:150], S[:150], Z[150:], S[150:]).r2_eval < 1.0
    W = fit_probe(Z, S, intercept=True)
    assert W.shape == (2, 3)
    np.testing.assert_allclose(apply_probe(W, Z), S, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32))
def test_probe_invariant_to_invertible_maps(seed):
    rng = Rng(seed)
    S = rng.normal((120, 4))
    Z = S @ rng.normal((4, 4)) + 0.5 * rng.normal((120, 4))
    A = rng.normal((4, 4)) + 2 * np.eye(4)
    a = probe_latents(Z[:80], S[:80], Z[80:], S[80:]).r2_eval
    b = probe_latents(Z[:80] @ A.T, S[:80], Z[80:] @ A.T, S[80:]).r2_eval
    assert abs(a - b) < 1e-6


def test_probe_is_fit_on_train_only():
    # eval targets cannot leak into the probe: scrambling them leaves W fixed
    rng = Rng(4)
    Z, S = rng.normal((100, 3)), rng.normal((100, 2))
    a = probe_latents(Z[:60], S[:60], Z[60:], S[60:])
    b = probe_latents(Z[:60], S[:60], Z[60:], rng.normal((40, 2)))
    assert a.W.tobytes() == b.W.tobytes()
    assert a.r2_train == b.r2_train


class _Oracle:
    """An encoder that knows the mixing map: z = pinv(C) x."""

    def __init__(self, C):
        self.P = np.linalg.pinv(C)

    def encode(self, X):
        return X @ self.P.T


def test_pinv_encoder_recovers_state_without_distractor():
    ds = generate_dataset(EnvParams(sigma=0.0, T=2000, seed=5))
    assert probe_eval(_Oracle(ds.maps.C), ds).r2_eval > 0.98


def test_diagnostics_layout():
    assert diagnostics_header(3) == ["t", "z0", "z1", "z2", "cov_0_1", "cov_0_2", "cov_1_2"]
    ds = generate_dataset(EnvParams(T=300, sigma=1.0, seed=6))
    learner = fit_learner("randproj", ds, seed=0)
    d = latent_diagnostics(learner, ds)
    Z = learner.encode(ds.X_eval)
    assert d["rows"].shape == (len(Z), 1 + 4 + 6)
    assert d["rows"][0, 0] == ds.split
    np.testing.assert_allclose(d["variance"], Z.var(axis=0))
    np.testing.assert_allclose(d["rows"][:, 5].mean(), d["covariance"][0, 1], atol=1e-12)


def test_diagnostics_collapsed_encoder_has_zero_variance(tmp_path):
    ds = generate_dataset(EnvParams(T=200, seed=7))
    learner = fit_learner("randproj", ds, seed=0)
    learner.W[...] = 0.0
    d = latent_diagnostics(learner, ds)
    assert np.all(d["variance"] == 0) and np.all(d["rows"][:, 1:] == 0)
    write_diagnostics_csv(d, tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == ",".join(d["header"]) and len(lines) == len(ds.X_eval) + 1


def test_degenerate_state_dim_flagged():
    ds = generate_dataset(EnvParams(T=200, seed=8))
    learner = fit_learner("pca", ds, ModelConfig())
    S = ds.S_eval.copy()
    S[:, 2] = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = probe_latents(learner.encode(ds.X_train), ds.S_train, learner.encode(ds.X_eval), S)
    assert res.degenerate_dims == (2,)
