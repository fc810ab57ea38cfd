import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvbench.env import (
    Dataset,
    EnvParams,
    MixingMaps,
    analytic_snr_db,
    compute_snr_db,
    generate_dataset,
    load_dataset,
    make_mixing,
    make_rotation,
    observe,
    save_csv,
    save_dataset,
    step_distractor,
    step_signal,
)
from tvbench.numerics import Rng, gauss_sample

SMALL = dict(T=400, seed=3)


def test_rotation_zero_angle_is_identity():
    assert np.array_equal(make_rotation(4, 0.0), np.eye(4))


def test_rotation_quarter_turn():
    np.testing.assert_allclose(make_rotation(2, math.pi / 2), [[0, -1], [1, 0]], atol=1e-15)


def test_rotation_odd_size_rejected():
    with pytest.raises(ValueError):
        make_rotation(3, 0.1)


@given(st.integers(1, 6).map(lambda k: 2 * k), st.floats(-10, 10))
def test_rotation_orthogonal(n, omega):
    Q = make_rotation(n, omega)
    np.testing.assert_allclose(Q.T @ Q, np.eye(n), atol=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        EnvParams(alpha=1.0)
    with pytest.raises(ValueError):
        EnvParams(n_s=3)
    with pytest.raises(ValueError):
        EnvParams(sigma_e=-0.1)
    with pytest.raises(ValueError):
        EnvParams(train_frac=1.0)
    with pytest.raises(ValueError):
        EnvParams(T=2, train_frac=0.1)


def test_mixing_columns_unit_norm():
    maps = make_mixing(EnvParams(), Rng(0))
    assert maps.C.shape == (20, 4) and maps.D.shape == (20, 4)
    np.testing.assert_allclose(np.linalg.norm(maps.C, axis=0), 1.0, atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(maps.D, axis=0), 1.0, atol=1e-10)


def test_mixing_deterministic():
    a, b = make_mixing(EnvParams(), Rng(9)), make_mixing(EnvParams(), Rng(9))
    assert a.C.tobytes() == b.C.tobytes() and a.D.tobytes() == b.D.tobytes()


def test_mixing_columns_nearly_orthogonal_on_average():
    overlaps = []
    for seed in range(100):
        C = make_mixing(EnvParams(), Rng(seed)).C
        G = np.abs(C.T @ C)
        overlaps.extend(G[np.triu_indices(4, 1)])
    # E|<c_i, c_j>| ~ sqrt(2 / (pi n_x)) ~ 0.18 for n_x = 20
    assert np.mean(overlaps) < 0.4


def test_step_signal_fixed_point():
    A = 0.99 * make_rotation(4, 0.3)
    assert np.all(step_signal(np.zeros(4), A, Rng(0), 0.0) == 0)


def test_step_signal_rotates_basis_vector():
    alpha, omega = 0.99, 0.3
    A = alpha * make_rotation(4, omega)
    out = step_signal(np.array([1.0, 0, 0, 0]), A, Rng(0), 0.0)
    np.testing.assert_allclose(out, alpha * np.array([math.cos(omega), math.sin(omega), 0, 0]), atol=1e-15)


def test_signal_norm_contracts_by_alpha():
    alpha = 0.97
    A = alpha * make_rotation(4, 0.7)
    s0 = np.array([0.3, -1.2, 2.0, 0.5])
    s = s0.copy()
    for t in range(1, 200):
        s = step_signal(s, A, Rng(0), 0.0)
        assert np.linalg.norm(s) == pytest.approx(alpha**t * np.linalg.norm(s0), rel=1e-12)


def test_step_distractor_decay():
    assert np.all(step_distractor(np.zeros(4), Rng(0), 0.0) == 0)
    np.testing.assert_allclose(step_distractor(np.ones(4), Rng(0), 0.0), [0.9] * 4)


def test_distractor_stationary_variance():
    sigma_v = 0.1
    target = sigma_v**2 / (1 - 0.81)
    rng = Rng(123)
    d = gauss_sample(rng, 100, math.sqrt(target))
    acc = np.zeros(100)
    steps = 10_000
    for _ in range(steps):
        d = step_distractor(d, rng, sigma_v)
        acc += d * d
    # 10^6 draws in total (100 chains x 10^4 steps)
    assert abs(acc.sum() / (100 * steps) / target - 1) < 0.02


def test_observe_zero():
    maps = make_mixing(EnvParams(), Rng(0))
    assert np.all(observe(np.zeros(4), np.zeros(4), maps, 3.0, Rng(1), 0.0) == 0)


def test_observe_without_distractor_is_Cs():
    maps = make_mixing(EnvParams(), Rng(0))
    s = np.array([1.0, 2.0, -1.0, 0.5])
    np.testing.assert_allclose(observe(s, np.ones(4), maps, 0.0, Rng(1), 0.0), maps.C @ s, atol=1e-15)


def test_observe_linear_in_signal():
    maps = make_mixing(EnvParams(), Rng(0))
    rng = Rng(4)
    s1, s2, d = rng.normal(4), rng.normal(4), rng.normal(4)
    diff = observe(s1 + s2, d, maps, 2.0, Rng(1), 0.0) - observe(s2, d, maps, 2.0, Rng(1), 0.0)
    np.testing.assert_allclose(diff, maps.C @ s1, atol=1e-12)


def test_dataset_split_arithmetic():
    ds = generate_dataset(EnvParams(T=100, train_frac=0.8))
    assert ds.split == 80
    assert ds.X.shape == (100, 20) and ds.S.shape == (100, 4) and ds.Dd.shape == (100, 4)
    assert len(ds.X_train) == 80 and len(ds.X_eval) == 20


def test_dataset_bit_identical_replay():
    a, b = generate_dataset(EnvParams(**SMALL, sigma=2.0)), generate_dataset(EnvParams(**SMALL, sigma=2.0))
    for name in ("S", "Dd", "X"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    assert a.checksum() == b.checksum()


def test_dataset_no_excitation_is_zero():
    p = EnvParams(T=50, sigma_w=0, sigma_v=0, sigma_e=0, sigma=2.0, stationary_init=False)
    assert np.all(generate_dataset(p).X == 0)


def test_dataset_matches_step_functions():
    # the vectorised generator reproduces x_t = C s_t + D (sigma d_t) exactly
    p = EnvParams(**SMALL, sigma=1.5)
    ds = generate_dataset(p)
    A = p.alpha * make_rotation(4, p.omega)
    for t in range(5):
        np.testing.assert_allclose(step_signal(ds.S[t], A, Rng(0), 0.0), A @ ds.S[t])
    resid = ds.X - ds.S @ ds.maps.C.T - p.sigma * ds.Dd @ ds.maps.D.T
    assert abs(resid.std() - p.sigma_e) < 0.01


def test_dataset_sigma_only_scales_distractor():
    a = generate_dataset(EnvParams(**SMALL, sigma=1.0))
    b = generate_dataset(EnvParams(**SMALL, sigma=3.0))
    assert a.S.tobytes() == b.S.tobytes() and a.Dd.tobytes() == b.Dd.tobytes()
    np.testing.assert_allclose(b.X - a.X, 2.0 * a.Dd @ a.maps.D.T, atol=1e-12)


def test_stationary_moments_long_run():
    p = EnvParams(T=100_000, sigma=1.0, seed=0)
    ds = generate_dataset(p)
    assert np.all(np.abs(ds.S.var(axis=0) / p.signal_var - 1) < 0.05)
    assert np.all(np.abs(ds.Dd.var(axis=0) / p.distractor_var - 1) < 0.05)


def _fake(S, Dd, C, D, p):
    return Dataset(S=S, Dd=Dd, X=np.zeros((len(S), C.shape[0])), split=1, snr_db=0.0, params=p,
                   maps=MixingMaps(C, D))


def test_snr_zero_db_when_balanced():
    # signal variance 2 = distractor variance 1 + noise n_x sigma_e^2 = 1
    p = EnvParams(n_s=2, n_d=2, n_x=4, sigma=1.0, sigma_e=0.5)
    S = np.array([[1.0, 0], [-1.0, 0]])
    Dd = np.array([[np.sqrt(0.5), 0], [-np.sqrt(0.5), 0]])
    C = D = np.eye(4)[:, :2]
    assert compute_snr_db(_fake(S, Dd, C, D, p), MixingMaps(C, D), p) == pytest.approx(0.0, abs=1e-12)


def test_snr_infinite_without_noise():
    p = EnvParams(sigma=0.0, sigma_e=0.0, **SMALL)
    ds = generate_dataset(p)
    assert math.isinf(ds.snr_db) and ds.snr_db > 0
    assert math.isinf(analytic_snr_db(p))


@pytest.mark.parametrize("sigma", [1.0, 2.0, 4.0, 6.0, 8.0])
def test_snr_matches_analytic_formula(sigma):
    p = EnvParams(sigma=sigma, seed=0)
    ds = generate_dataset(p)
    assert abs(ds.snr_db - analytic_snr_db(p)) < 0.5


def test_analytic_snr_scaling_law():
    a = analytic_snr_db(EnvParams(sigma=2.0, sigma_e=0.0))
    b = analytic_snr_db(EnvParams(sigma=4.0, sigma_e=0.0))
    assert a - b == pytest.approx(20 * math.log10(2), abs=1e-12)


def test_snr_monotone_in_sigma():
    snrs = [generate_dataset(EnvParams(**SMALL, sigma=s)).snr_db for s in (0, 0.5, 1, 2, 4, 8)]
    assert all(b <= a for a, b in zip(snrs, snrs[1:]))


def test_dataset_npz_round_trip(tmp_path):
    ds = generate_dataset(EnvParams(**SMALL, sigma=2.0))
    back = load_dataset(save_dataset(ds, tmp_path / "d.npz"))
    assert back.X.tobytes() == ds.X.tobytes()
    assert back.split == ds.split and back.params == ds.params
    assert back.snr_db == ds.snr_db


def test_dataset_csv_export(tmp_path):
    ds = generate_dataset(EnvParams(T=10, seed=1))
    lines = save_csv(ds, tmp_path / "d.csv").read_text().splitlines()
    assert lines[0].startswith("t,split,s0,s1,s2,s3,x0")
    assert len(lines) == 11
    assert lines[8].split(",")[1] == "train" and lines[9].split(",")[1] == "eval"
