import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from temporalrecon import arma
from temporalrecon.arma import ArmaModel, ArmaSpec
from temporalrecon.errors import (
    AllFitsFailed,
    DegenerateSeries,
    InsufficientData,
    InsufficientHistory,
    InvalidPacf,
    NonStationaryModel,
)

pacfs = st.lists(st.floats(-0.99, 0.99), max_size=6)


def naive_forecast(phi, theta, mu, y, h):
    """Textbook recursion: residuals by looping, then the conditional mean."""
    p, q = len(phi), len(theta)
    w = np.asarray(y, dtype=float) - mu
    e = np.zeros(w.size)
    for t in range(p, w.size):
        e[t] = w[t] - sum(phi[i] * w[t - 1 - i] for i in range(p)) - sum(
            theta[j] * e[t - 1 - j] for j in range(q) if t - 1 - j >= p
        )
    ext = list(w)
    eext = list(e)
    for _ in range(h):
        t = len(ext)
        v = sum(phi[i] * ext[t - 1 - i] for i in range(p))
        v += sum(theta[j] * eext[t - 1 - j] for j in range(q) if p <= t - 1 - j < w.size)
        ext.append(v)
        eext.append(0.0)
    return np.array(ext[w.size:]) + mu


def test_model_checks():
    assert ArmaModel([0.5], [0.3]).is_stationary()
    with pytest.raises(NonStationaryModel):
        arma.simulate(ArmaModel([1.0], []), 10, seed=0)
    assert not ArmaModel([], [1.5]).is_invertible()
    assert str(ArmaSpec(1, 1, 2)) == "ARIMA(1,1,2)"


def test_simulate_white_noise_moments():
    x = arma.simulate(ArmaModel([], []), 100_000, seed=1)
    se = 1 / np.sqrt(x.size)
    assert abs(x.mean()) < 3 * se
    assert abs(x.var() - 1) < 3 * np.sqrt(2) * se


def test_simulate_ar1_variance():
    x = arma.simulate(ArmaModel([0.9], []), 100_000, seed=2)
    assert abs(x.var() / (1 / (1 - 0.81)) - 1) < 0.05


def test_simulate_is_deterministic():
    m = ArmaModel([0.3], [0.4], mu=2.0)
    np.testing.assert_array_equal(arma.simulate(m, 50, seed=7), arma.simulate(m, 50, seed=7))
    y = arma.simulate(ArmaModel([0.5], [], d=1), 200, seed=3)
    assert y.size == 200


def test_pacf_examples():
    np.testing.assert_allclose(arma.pacf_to_ar([0.8]), [0.8])
    np.testing.assert_allclose(arma.pacf_to_ar([0.5, 0.2]), [0.4, 0.2])
    assert arma.pacf_to_ar([]).size == 0
    with pytest.raises(InvalidPacf):
        arma.pacf_to_ar([1.0])


@given(pacfs)
def test_pacf_roundtrip_and_stationarity(r):
    phi = arma.pacf_to_ar(r)
    assert ArmaModel(phi, []).is_stationary()
    np.testing.assert_allclose(arma.ar_to_pacf(phi), r, atol=1e-7)


def test_draw_stationary_ar2_triangle():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        m = arma.draw_stationary(2, 0, rng)
        f1, f2 = m.phi
        assert -1 < f2 < 1 and f2 + f1 < 1 and f2 - f1 < 1
        assert m.theta.size == 0


@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_draw_stationary_is_valid(p, q, seed):
    m = arma.draw_stationary(p, q, np.random.default_rng(seed))
    assert m.p == p and m.q == q and m.is_stationary() and m.is_invertible()


def test_draw_stationary_p1_is_uniform():
    rng = np.random.default_rng(5)
    phis = np.array([arma.draw_stationary(1, 0, rng).phi[0] for _ in range(4000)])
    assert abs(phis.mean()) < 0.05 and abs(phis.var() - 1 / 3) < 0.03


def test_fit_ar1_recovers_phi():
    est = [arma.fit(arma.simulate(ArmaModel([0.8], []), 1000, seed=s), ArmaSpec(1, 0, 0)).model.phi[0]
           for s in range(20)]
    assert abs(np.mean(est) - 0.8) < 0.05


def test_fit_errors():
    with pytest.raises(DegenerateSeries):
        arma.fit(np.zeros(50), ArmaSpec(0, 0, 0))
    with pytest.raises(InsufficientData):
        arma.fit(np.arange(4.0), ArmaSpec(1, 0, 1))


def test_fit_aicc_formula():
    y = arma.simulate(ArmaModel([0.5], [0.2]), 300, seed=9)
    r = arma.fit(y, ArmaSpec(1, 0, 1))
    kappa = 4
    n = y.size
    assert r.aicc == pytest.approx(-2 * r.loglik + 2 * kappa * n / (n - kappa - 1))
    assert r.model.is_stationary() and r.model.is_invertible()


def test_white_noise_prefers_null_model():
    wins = 0
    for s in range(50):
        y = arma.simulate(ArmaModel([], []), 200, seed=100 + s)
        wins += arma.fit(y, ArmaSpec(0, 0, 0)).aicc < arma.fit(y, ArmaSpec(1, 0, 0)).aicc
    assert wins >= 40


def test_fit_consistency_improves_with_n():
    med = []
    for n in (200, 1000, 5000):
        errs = [abs(arma.fit(arma.simulate(ArmaModel([0.6], []), n, seed=s), (1, 0, 0)).model.phi[0] - 0.6)
                for s in range(20)]
        med.append(np.median(errs))
    assert med[0] > med[1] > med[2]


def test_select_order_ar1():
    hits = sum(
        arma.select_order(arma.simulate(ArmaModel([0.8], []), 500, seed=s), 3, 3).spec.p >= 1
        for s in range(50)
    )
    assert hits >= 45


def test_select_order_white_noise():
    # a (1, 1) grid; larger grids admit near-cancelling ARMA pairs more often
    hits = 0
    for s in range(50):
        f = arma.select_order(arma.simulate(ArmaModel([], []), 500, seed=200 + s), 1, 1)
        hits += (f.spec.p, f.spec.q) == (0, 0)
    assert hits >= 30


def test_select_order_single_candidate_and_failure():
    y = arma.simulate(ArmaModel([0.5], [], d=1), 100, seed=1)
    assert arma.select_order(y, 0, 0, d=1).spec == ArmaSpec(0, 1, 0)
    with pytest.raises(AllFitsFailed):
        arma.select_order(np.arange(2.0), 1, 1)


def test_forecast_examples():
    np.testing.assert_allclose(arma.forecast(ArmaModel([0.5], []), [2.0], 2), [1.0, 0.5])
    np.testing.assert_allclose(arma.forecast(ArmaModel([], [], mu=3.0), [1.0, 5.0], 4), [3.0] * 4)
    np.testing.assert_allclose(arma.forecast(ArmaModel([], [0.5]), [1.0], 2), [0.5, 0.0])
    with pytest.raises(InsufficientHistory):
        arma.forecast(ArmaModel([0.5, 0.1], []), [1.0], 1)


def test_forecast_inverts_differencing():
    # random walk with drift-free increments: forecasts stay at the last value
    np.testing.assert_allclose(arma.forecast(ArmaModel([], [], d=1), [1.0, 4.0, 2.0], 3), [2.0] * 3)
    # d=1 with AR(1) increments: y_{t+1} = y_t + 0.5 (y_t - y_{t-1})
    np.testing.assert_allclose(arma.forecast(ArmaModel([0.5], [], d=1), [0.0, 2.0], 2), [3.0, 3.5])
    # d=2: constant second differences zero -> linear extrapolation
    np.testing.assert_allclose(arma.forecast(ArmaModel([], [], d=2), [1.0, 3.0, 5.0], 2), [7.0, 9.0])


@settings(deadline=None, max_examples=50)
@given(st.lists(st.floats(-0.9, 0.9), max_size=3), st.lists(st.floats(-0.9, 0.9), max_size=2),
       st.floats(-5, 5), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_rolling_forecasts_match_naive_recursion(r_ar, r_ma, mu, h, seed):
    phi, theta = arma.pacf_to_ar(r_ar), -arma.pacf_to_ar(r_ma)
    model = ArmaModel(phi, theta, mu=mu)
    y = arma.simulate(model, 40, seed=seed)
    origins = np.arange(model.p, 41, 7)
    F = arma.rolling_forecasts(model, y, h, origins)
    for row, t in zip(F, origins):
        np.testing.assert_allclose(row, naive_forecast(phi, theta, mu, y[:t], h), atol=1e-9)


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(0.1, 10), st.integers(0, 2**32 - 1))
def test_forecast_is_linear(r1, r2, a, seed):
    model = ArmaModel([r1], [r2])
    y = arma.simulate(model, 30, seed=seed)
    np.testing.assert_allclose(arma.forecast(model, a * y, 3), a * arma.forecast(model, y, 3), atol=1e-9)


def test_hstep_residuals():
    x = np.random.default_rng(0).normal(size=50)
    np.testing.assert_allclose(arma.hstep_residuals(ArmaModel([], []), x, 1), x)
    y = 0.7 ** np.arange(30.0)
    np.testing.assert_allclose(arma.hstep_residuals(ArmaModel([0.7], []), y, 2), 0, atol=1e-12)
    with pytest.raises(InsufficientHistory):
        arma.hstep_residuals(ArmaModel([0.5], []), [1.0], 1)


def test_hstep_residuals_at_true_model():
    model = ArmaModel([0.8], [])
    y = arma.simulate(model, 10_000, seed=4)
    e = arma.hstep_residuals(model, y, 1)
    assert abs(e.var() - 1) < 0.1
    r1 = np.corrcoef(e[1:], e[:-1])[0, 1]
    assert abs(r1) < 3 / np.sqrt(e.size)
