import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_ridge_instance, ridge_gd
from sonoangle.errors import NumericalError, ValidationError
from sonoangle.regression import (
    RidgeModel,
    normal_equation_residual,
    r_squared,
    ridge_fit,
    ridge_loss,
    ridge_predict,
    rmse,
    split_contiguous,
)
from sonoangle.signal import ZScoreParams


# -- fit ----------------------------------------------------------------------


def test_single_perfect_predictor():
    theta = np.array([0.5, -1.0, 2.0, 0.25])
    w = ridge_fit(theta[None, :], theta, 0.0)
    np.testing.assert_allclose(w, [1.0], rtol=1e-14)


def test_huge_lambda_shrinks_to_zero():
    rng = np.random.default_rng(1)
    S, theta = rng.normal(size=(6, 30)), rng.normal(size=30)
    lam = 1e12
    w = ridge_fit(S, theta, lam)
    rhs = np.linalg.norm(theta @ S.T)
    # w -> theta S^T / lam as lam grows
    assert np.linalg.norm(w) <= rhs / lam
    assert np.linalg.norm(w) < 1e-6 * rhs
    np.testing.assert_allclose(w, theta @ S.T / lam, rtol=1e-9)


def test_two_by_three_example():
    S = np.array([[1.0, 0, 1], [0, 1, 1]])
    theta = np.array([1.0, 2, 3])
    w = ridge_fit(S, theta, 0.5)
    # (S S^T + 0.5 I) = [[2.5, 1], [1, 2.5]], S theta = [4, 5]
    np.testing.assert_allclose(w, [20 / 21, 34 / 21], rtol=1e-12)
    np.testing.assert_allclose(w, np.linalg.solve([[2.5, 1], [1, 2.5]], [4, 5]), rtol=1e-12)
    np.testing.assert_allclose(w, ridge_gd(S, theta, 0.5), rtol=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_matches_gradient_descent_oracle(seed):
    S, theta, lam = random_ridge_instance(np.random.default_rng(seed))
    w = ridge_fit(S, theta, lam)
    ref = ridge_gd(S, theta, lam)
    assert np.linalg.norm(w - ref) <= 1e-6 * np.linalg.norm(ref)
    assert normal_equation_residual(S, theta, w, lam) < 1e-8


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_primal_dual_agree(seed):
    S, theta, lam = random_ridge_instance(np.random.default_rng(seed))
    wp = ridge_fit(S, theta, lam, form="primal")
    wd = ridge_fit(S, theta, lam, form="dual")
    assert np.linalg.norm(wp - wd) <= 1e-8 * np.linalg.norm(wp)


@given(seed=st.integers(0, 2**32 - 1), l1=st.floats(1e-3, 1e3), factor=st.floats(1.01, 100))
@settings(max_examples=60, deadline=None)
def test_monotone_shrinkage(seed, l1, factor):
    S, theta, _ = random_ridge_instance(np.random.default_rng(seed))
    n1 = np.linalg.norm(ridge_fit(S, theta, l1))
    n2 = np.linalg.norm(ridge_fit(S, theta, l1 * factor))
    assert n1 >= n2 * (1 - 1e-12)


@given(seed=st.integers(0, 2**32 - 1), lam=st.sampled_from([1e-6, 0.1, 10.0, 1e4]))
@settings(max_examples=60, deadline=None)
def test_normal_equation_residual(seed, lam):
    S, theta, _ = random_ridge_instance(np.random.default_rng(seed))
    w = ridge_fit(S, theta, lam)
    assert normal_equation_residual(S, theta, w, lam) < 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_stationarity_by_finite_differences(seed):
    S, theta, lam = random_ridge_instance(np.random.default_rng(100 + seed))
    w = ridge_fit(S, theta, lam)
    h = 1e-6

    def loss(v):
        # the objective the closed form minimizes: full lambda on the penalty
        return ridge_loss(theta, ridge_predict(v, S), v, lam, half_penalty=False)

    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g = (loss(w + e) - loss(w - e)) / (2 * h)
        assert abs(g) < 1e-5


def test_interpolation_regime():
    rng = np.random.default_rng(3)
    S, theta = rng.normal(size=(20, 8)), rng.normal(size=8)
    w = ridge_fit(S, theta, 0.0)  # dual form, S^T S is nonsingular
    np.testing.assert_allclose(ridge_predict(w, S), theta, atol=1e-8)


def test_singular_at_zero_lambda():
    S = np.array([[1.0, 2, 3, 4], [2.0, 4, 6, 8]])
    with pytest.raises(NumericalError, match="positive lambda"):
        ridge_fit(S, np.arange(4.0), 0.0)
    w = ridge_fit(S, np.arange(4.0), 1e-3)
    assert np.all(np.isfinite(w))


def test_fit_input_validation():
    with pytest.raises(ValidationError):
        ridge_fit(np.zeros((2, 5)), np.zeros(4), 1.0)
    with pytest.raises(ValidationError):
        ridge_fit(np.ones((2, 5)), np.zeros(5), -1.0)
    with pytest.raises(ValidationError):
        ridge_fit(np.ones((2, 1)), np.zeros(1), 1.0)


# -- predict and loss ---------------------------------------------------------


def test_predict_examples():
    S = np.arange(12.0).reshape(3, 4)
    np.testing.assert_array_equal(ridge_predict(np.zeros(3), S), np.zeros(4))
    np.testing.assert_array_equal(ridge_predict([1.0, 0, 0], S), S[0])
    with pytest.raises(ValidationError):
        ridge_predict(np.zeros(2), S)


def test_loss_examples():
    assert ridge_loss([1.0, 2.0], [1.0, 2.0], [0.0, 0.0], 5.0) == 0.0
    assert ridge_loss([1.0], [0.0], [2.0], 1.0) == pytest.approx(3.0)
    assert ridge_loss([1.0], [0.0], [2.0], 1.0, half_penalty=False) == pytest.approx(5.0)
    with pytest.raises(ValidationError):
        ridge_loss([1.0, 2.0], [1.0], [0.0], 1.0)


# -- metrics ------------------------------------------------------------------


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.sqrt(12.5))
    with pytest.raises(ValidationError):
        rmse([1.0], [1.0, 2.0])


def test_r_squared_examples():
    y = np.array([1.0, 2.0, 3.0])
    assert r_squared(y, y) == 1.0
    assert r_squared(y, np.full(3, 2.0)) == 0.0
    assert r_squared(y, [1.0, 2.0, 4.0]) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        r_squared([2.0, 2.0], [1.0, 2.0])


def test_split_examples():
    tr, va = split_contiguous(3780, 0.8)
    assert (tr[0], tr[-1], va[0], va[-1]) == (0, 3023, 3024, 3779)
    tr, va = split_contiguous(5, 0.8)
    assert tr.tolist() == [0, 1, 2, 3] and va.tolist() == [4]
    with pytest.raises(ValidationError):
        split_contiguous(100, 1.0)
    with pytest.raises(ValidationError):
        split_contiguous(4, 0.5)


@given(T=st.integers(5, 10_000), frac=st.floats(0.01, 0.99))
def test_split_property(T, frac):
    n = int(np.floor(T * frac))
    if n < 1 or n >= T:
        with pytest.raises(ValidationError):
            split_contiguous(T, frac)
        return
    tr, va = split_contiguous(T, frac)
    assert len(tr) == n and len(va) == T - n
    assert np.array_equal(np.r_[tr, va], np.arange(T))


# -- persistence --------------------------------------------------------------


def _model(rng, F=7):
    return RidgeModel(
        weights=rng.normal(size=F) * 10.0 ** rng.integers(-8, 8, size=F),
        lam=10.0,
        feature_zparams=ZScoreParams(rng.normal(size=F), rng.uniform(0.1, 3, size=F)),
        angle_zparams=ZScoreParams(np.array([1.5]), np.array([30.2])),
        channel_ids=[(i // 2, "xy"[i % 2]) for i in range(F)],
        config_fingerprint="abc123",
    )


def test_model_json_bit_exact(tmp_path):
    m = _model(np.random.default_rng(9))
    m.save(tmp_path / "m.json")
    back = RidgeModel.load(tmp_path / "m.json")
    assert back.weights.tobytes() == m.weights.tobytes()
    assert back.feature_zparams.std.tobytes() == m.feature_zparams.std.tobytes()
    assert back.channel_ids == m.channel_ids
    assert back.to_json() == m.to_json()


def test_model_predict_deg():
    m = _model(np.random.default_rng(2), F=2)
    S = np.ones((2, 3))
    np.testing.assert_allclose(m.predict_deg(S), m.weights.sum() * 30.2 + 1.5)


def test_model_schema_checked():
    text = _model(np.random.default_rng(0)).to_json().replace('"schema_version": 1', '"schema_version": 9')
    with pytest.raises(ValidationError):
        RidgeModel.from_json(text)
