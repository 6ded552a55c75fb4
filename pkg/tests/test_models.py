import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gasforge.models import (
    MODEL_REGISTRY, ConditioningError, DivergenceError, LinearModel, MlpModel, NamModel, ShapeError,
    TrainConfig, finite_diff_gradcheck, fit_linear, fit_mlp, fit_model, fit_nam, load_model, mse,
    predict, register_model, save_model, variance,
)


def test_metrics():
    y = np.array([0.1, -0.4, 0.9])
    assert mse(y, y) == 0.0
    assert mse(y + 1, y) == 1.0
    assert variance([0.3, 0.3, 0.3]) == 0.0
    assert variance([1.0, 3.0]) == 1.0
    with pytest.raises(ValueError):
        mse([], [])
    with pytest.raises(ValueError):
        variance([])
    with pytest.raises(ShapeError):
        mse([1.0], [1.0, 2.0])


def test_config_validation():
    for bad in ({"learning_rate": 0}, {"grid_points": 1}, {"step": 0}, {"penalty_weight": -1},
                {"activation": "relu"}, {"widths": (0,)}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    assert TrainConfig().with_overrides(epochs=3).epochs == 3


@given(st.integers(1, 6), st.integers(0, 2**31))
def test_linear_exact_recovery(d, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (4 * d + 10, d))
    w = rng.normal(0, 3, d)
    b = rng.normal()
    m = fit_linear(X, X @ w + b)
    assert np.abs(m.weights - w).max() < 1e-8
    assert abs(m.bias[0] - b) < 1e-8


def test_linear_constant_and_underdetermined():
    X = np.random.default_rng(0).normal(size=(20, 3))
    m = fit_linear(X, np.full(20, 2.5))
    assert np.all(m.weights == 0.0)
    assert m.bias[0] == pytest.approx(2.5, abs=1e-12)
    with pytest.raises(ShapeError):
        fit_linear(X[:3], np.zeros(3))
    with pytest.raises(ConditioningError):
        fit_linear(np.hstack([X, X[:, :1] * 1e9]), np.zeros(20))


def test_predict_contract():
    m = LinearModel(np.zeros(3), np.array([0.7]))
    assert np.all(predict(m, np.ones((5, 3))) == 0.7)
    with pytest.raises(ShapeError):
        m.predict(np.ones((2, 4)))
    with pytest.raises(FloatingPointError):
        predict(LinearModel(np.array([np.inf]), np.zeros(1)), np.ones((1, 1)))


@pytest.mark.parametrize("kind", ["linear", "mlp", "nam"])
def test_batch_predict_equals_rowwise(kind):
    from gasforge.models.gradcheck import build
    m = build(kind, 4, seed=3, widths=(5, 3))
    X = np.random.default_rng(1).uniform(size=(17, 4))
    rows = np.array([m.predict(x[None, :])[0] for x in X])
    np.testing.assert_allclose(m.predict(X), rows, rtol=0, atol=1e-15)
    with pytest.raises(ShapeError):
        m.predict(np.ones((2, 3)))


def _xor_like(n=512, seed=0):
    X = np.random.default_rng(seed).uniform(-1, 1, (n, 2))
    return X, X[:, 0] * X[:, 1]


def test_mlp_learns_xor_like_target():
    X, y = _xor_like()
    m = fit_mlp(X, y, TrainConfig(learning_rate=0.1, epochs=300, widths=(16, 16), batch_size=32))
    assert mse(m.predict(X), y) < 0.01


@pytest.mark.parametrize("fit, cls", [(fit_mlp, MlpModel), (fit_nam, NamModel)])
def test_zero_epochs_returns_initialized_model(fit, cls):
    X, y = _xor_like(64)
    cfg = TrainConfig(epochs=0, widths=(8,), seed=4)
    m = fit(X, y, cfg)
    fresh = cls.init(2, (8,), rng=np.random.default_rng(4))
    for a, b in zip(m.params, fresh.params):
        np.testing.assert_array_equal(a, b)
    assert m.history == []


@pytest.mark.parametrize("fit", [fit_mlp, fit_nam])
def test_trainers_deterministic(fit):
    X, y = _xor_like(128)
    cfg = TrainConfig(epochs=5, widths=(6, 6), seed=11, learning_rate=0.05)
    a, b = fit(X, y, cfg), fit(X, y, cfg)
    for p, q in zip(a.params, b.params):
        assert np.array_equal(p, q)
    c = fit(X, y, cfg.with_overrides(seed=12))
    assert not np.array_equal(a.params[0], c.params[0])


@pytest.mark.parametrize("fit", [fit_mlp, fit_nam])
def test_full_batch_loss_curve_non_increasing(fit):
    X, y = _xor_like(200, seed=3)
    cfg = TrainConfig(epochs=150, widths=(8, 8), learning_rate=0.01, batch_size=200)
    curve = [h["mse"] for h in fit(X, y, cfg).history]
    assert all(b <= a + 1e-6 for a, b in zip(curve, curve[1:]))
    assert curve[-1] < curve[0]


@pytest.mark.filterwarnings("ignore:overflow encountered")
@pytest.mark.parametrize("fit", [fit_mlp, fit_nam])
def test_divergence_names_epoch(fit):
    X, y = _xor_like(64)
    with pytest.raises(DivergenceError) as e:
        fit(X, y * 1e3, TrainConfig(learning_rate=1e3, epochs=50, widths=(8,)))
    assert 0 <= e.value.epoch < 50


def test_nam_learns_additive_target():
    rng = np.random.default_rng(0)
    g = lambda X: np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    X, Xt = rng.uniform(0, 1, (1000, 2)), rng.uniform(0, 1, (300, 2))
    m = fit_nam(X, g(X), TrainConfig(learning_rate=0.05, epochs=200, widths=(16, 16)))
    assert mse(m.predict(Xt), g(Xt)) < 0.01


@given(st.integers(1, 5), st.integers(0, 1000))
@settings(max_examples=30)
def test_nam_decomposition_exact(f, seed):
    from gasforge.models.gradcheck import build
    m = build("nam", f, seed=seed, widths=(4, 3))
    X = np.random.default_rng(seed).uniform(-1, 2, (9, f))
    contrib = m.contributions(X)
    assert contrib.shape == (9, f)
    assert np.array_equal(m.predict(X), contrib.sum(axis=1) + m.bias[0])
    for j in range(f):
        assert np.array_equal(m.contribution(j, X[:, j]), contrib[:, j])


def test_single_feature_nam_matches_mlp():
    rng = np.random.default_rng(1)
    X, Xt = rng.uniform(0, 1, (400, 1)), rng.uniform(0, 1, (400, 1))
    y = np.sin(4 * X[:, 0]) + rng.normal(0, 0.1, 400)
    yt = np.sin(4 * Xt[:, 0]) + rng.normal(0, 0.1, 400)
    nam, mlp = [], []
    for seed in range(5):
        cfg = TrainConfig(learning_rate=0.05, epochs=800, widths=(16, 16), seed=seed, batch_size=32)
        nam.append(mse(fit_nam(X, y, cfg).predict(Xt), yt))
        mlp.append(mse(fit_mlp(X, y, cfg).predict(Xt), yt))
    assert abs(np.mean(nam) - np.mean(mlp)) <= 0.05 * np.mean(mlp)


@pytest.mark.parametrize("kind", ["linear", "mlp", "nam"])
@pytest.mark.parametrize("seed", range(5))
def test_gradcheck(kind, seed):
    rng = np.random.default_rng(seed)
    X, y = rng.uniform(size=(8, 3)), rng.normal(size=8)
    err = finite_diff_gradcheck(kind, X, y, seed=seed, widths=(4,))
    assert err < (1e-7 if kind == "linear" else 1e-4)


@pytest.mark.parametrize("activation", ["softplus", "sigmoid"])
def test_gradcheck_other_activations(activation):
    rng = np.random.default_rng(0)
    X, y = rng.uniform(size=(8, 2)), rng.normal(size=8)
    for kind in ("mlp", "nam"):
        assert finite_diff_gradcheck(kind, X, y, widths=(4, 3), activation=activation) < 1e-4


@pytest.mark.parametrize("kind", ["linear", "mlp", "nam"])
def test_serialization_round_trip(tmp_path, kind):
    from gasforge.models.gradcheck import build
    m = build(kind, 3, seed=2, widths=(5, 4), activation="softplus")
    p = tmp_path / "m.txt"
    save_model(m, p)
    assert p.read_text().startswith("gasforge-model 1\n")
    back = load_model(p)
    assert type(back) is type(m)
    for a, b in zip(m.params, back.params):
        assert np.array_equal(a, b)
    X = np.random.default_rng(0).uniform(size=(6, 3))
    assert np.array_equal(m.predict(X), back.predict(X))


def test_load_rejects_bad_header(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("not-a-model 1\n")
    with pytest.raises(ValueError):
        load_model(p)


def test_registry():
    X, y = _xor_like(40)
    assert set(MODEL_REGISTRY) >= {"linear", "mlp", "nam", "nam-monotonic"}
    assert isinstance(fit_model("linear", X, y, TrainConfig(), 1), LinearModel)
    with pytest.raises(ValueError):
        fit_model("xgboost", X, y, TrainConfig(), 1)
    with pytest.raises(ValueError):
        register_model("linear", lambda *a: None)
    register_model("mean-only", lambda X, y, c, k: LinearModel(np.zeros(X.shape[1]), np.array([y.mean()])))
    try:
        assert fit_model("mean-only", X, y, TrainConfig(), 1).bias[0] == pytest.approx(y.mean())
    finally:
        del MODEL_REGISTRY["mean-only"]
