import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import mint_direct, random_spd
from temporalrecon.aggtheory import theoretical_W1
from temporalrecon.errors import DegenerateVariance, DimensionMismatch, InsufficientResiduals, SingularCovariance
from temporalrecon.hierarchy import TemporalHierarchy, build_summing_matrix, check_coherence
from temporalrecon.reconcile import (
    BOTTOM_UP,
    CovSpec,
    WMatrix,
    bottom_up_G,
    estimate_W,
    mint_G,
    ols_G,
    parse_method,
    reconcile,
    reconciled_trace,
    shrinkage_intensity,
    spectral_precision,
    top_down_G,
)

S41 = build_summing_matrix(TemporalHierarchy((4, 1)))
HIERARCHIES = [(2, 1), (4, 1), (4, 2, 1), (6, 3, 1), (12, 4, 1), (12, 6, 3, 1)]


def residuals(n, N=200, seed=0):
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(random_spd(n, rng, cond=50))
    return rng.normal(size=(N, n)) @ L.T


def test_parse_method():
    assert parse_method("bottom_up") == BOTTOM_UP
    assert parse_method("full") == CovSpec("full")
    assert parse_method("shrink:0.3").lam == 0.3
    assert parse_method("shrink").lam == "auto"
    spec = parse_method("spectral:nu=0.5,n_eig=2")
    assert (spec.nu, spec.n_eig) == (0.5, 2)
    assert parse_method("spectral").label == "spectral:nu=auto,n_eig=cv"
    for bad in ("nope", "shrink:1.5", "spectral:nu", "spectral:n_eig=0"):
        with pytest.raises(ValueError):
            parse_method(bad)


def test_estimate_W_simple_variants():
    E = residuals(5)
    np.testing.assert_array_equal(estimate_W(E, CovSpec("ols"), S41).matrix, np.eye(5))
    np.testing.assert_array_equal(estimate_W(E, CovSpec("structural"), S41).matrix, np.diag([4, 1, 1, 1, 1]))
    np.testing.assert_allclose(estimate_W(E, CovSpec("variance"), S41).matrix, np.diag((E**2).mean(axis=0)))
    np.testing.assert_allclose(estimate_W(E, CovSpec("full"), S41).matrix, E.T @ E / E.shape[0])


def test_full_sample_rank_one_is_flagged():
    v = np.array([1.0, 2.0, -1.0, 0.5, 3.0])
    W = estimate_W(np.tile(v, (10, 1)), CovSpec("full"), S41)
    np.testing.assert_allclose(W.matrix, np.outer(v, v))
    assert W.singular
    with pytest.raises(SingularCovariance):
        mint_G(S41, W)


def test_full_sample_too_few_rows():
    with pytest.raises(SingularCovariance):
        estimate_W(residuals(5, N=4), CovSpec("full"), S41)
    W = estimate_W(residuals(5, N=4), CovSpec("full"), S41, allow_pinv=True)
    assert W.singular
    m = mint_G(S41, W, allow_pinv=True)
    np.testing.assert_allclose(m.SG @ S41, S41, atol=1e-8)
    with pytest.raises(InsufficientResiduals):
        estimate_W(residuals(5, N=1), CovSpec("full"), S41)
    with pytest.raises(DimensionMismatch):
        estimate_W(residuals(4), CovSpec("full"), S41)


def test_shrinkage():
    E = residuals(5)
    W = estimate_W(E, CovSpec("shrink", lam=0.3), S41).matrix
    F = E.T @ E / E.shape[0]
    np.testing.assert_allclose(W, 0.3 * np.diag(np.diag(F)) + 0.7 * F)
    lam = shrinkage_intensity(E)
    assert 0 <= lam <= 1
    # independent columns: the optimal target weight is large
    iid = np.random.default_rng(1).normal(size=(30, 5))
    assert shrinkage_intensity(iid) > lam


def test_spectral_full_shrinkage_equals_variance_scaling():
    E = residuals(5)
    G_spec = mint_G(S41, spectral_precision(E, 1.0, 2)).G
    G_var = mint_G(S41, estimate_W(E, CovSpec("variance"), S41)).G
    np.testing.assert_allclose(G_spec, G_var, atol=1e-10)


def test_spectral_without_shrinkage_equals_full_sample():
    E = residuals(5)
    G_spec = mint_G(S41, spectral_precision(E, 0.0, 5)).G
    G_full = mint_G(S41, estimate_W(E, CovSpec("full"), S41)).G
    np.testing.assert_allclose(G_spec, G_full, atol=1e-6)


@given(st.floats(0, 1), st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_spectral_precision_is_positive_definite(nu, n_eig, seed):
    S = build_summing_matrix(TemporalHierarchy((4, 2, 1)))
    E = residuals(7, N=40, seed=seed)
    W = spectral_precision(E, nu, n_eig)
    assert W.is_precision
    eig = np.linalg.eigvalsh(W.matrix)
    if nu > 0 or n_eig == 7:
        assert eig.min() > 0
    np.testing.assert_allclose(mint_G(S, W).SG @ S, S, atol=1e-8)


def test_spectral_cv_and_auto():
    E = residuals(5, N=60)
    for spec in (CovSpec("spectral"), CovSpec("spectral", nu="cv", n_eig=2), CovSpec("spectral", nu=0.2)):
        W = estimate_W(E, spec, S41)
        m = mint_G(S41, W)
        np.testing.assert_allclose(m.SG @ S41, S41, atol=1e-8)


def test_spectral_zero_variance():
    E = residuals(5)
    E[:, 2] = 0
    with pytest.raises(DegenerateVariance):
        spectral_precision(E, 0.5, 2)


def test_mint_G_ols_closed_form():
    G = ols_G(S41).G
    expected = np.hstack([np.full((4, 1), 0.2), np.eye(4) - np.full((4, 4), 0.2)])
    np.testing.assert_allclose(G, expected, atol=1e-12)


def test_mint_G_theoretical_is_bottom_up():
    W = WMatrix(theoretical_W1(0.8, 1.0, 4).W)
    np.testing.assert_allclose(mint_G(S41, W).G, bottom_up_G(S41).G, atol=1e-8)
    # at phi = 0 the exact covariance is singular
    W0 = estimate_W(None, CovSpec("theoretical", phi=0.0, sigma2=1.0), S41)
    assert W0.singular
    with pytest.raises(SingularCovariance):
        mint_G(S41, W0)
    np.testing.assert_allclose(mint_G(S41, W0, allow_pinv=True).G, bottom_up_G(S41).G, atol=1e-8)


def test_structural_weights():
    W = np.diag(S41.sum(axis=1))
    np.testing.assert_allclose(mint_G(S41, WMatrix(W)).G, mint_direct(S41, W), atol=1e-12)


@settings(deadline=None)
@given(st.sampled_from(HIERARCHIES), st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_mint_matches_direct_formula_and_is_scale_free(ks, seed, a):
    S = build_summing_matrix(TemporalHierarchy(ks))
    W = random_spd(S.shape[0], np.random.default_rng(seed))
    G = mint_G(S, WMatrix(W)).G
    np.testing.assert_allclose(G, mint_direct(S, W), atol=1e-8)
    np.testing.assert_allclose(mint_G(S, WMatrix(a * W)).G, G, atol=1e-8)


def test_bottom_up_and_reconcile_examples():
    bu = bottom_up_G(S41)
    np.testing.assert_array_equal(bu.SG, np.vstack([np.r_[0, np.ones(4)], np.c_[np.zeros(4), np.eye(4)]]))
    np.testing.assert_array_equal(reconcile([9, 1, 2, 3, 4], bu, S41), [10, 1, 2, 3, 4])
    coherent = np.array([10.0, 1, 2, 3, 4])
    for m in (bu, ols_G(S41)):
        np.testing.assert_allclose(reconcile(coherent, m, S41), coherent, atol=1e-12)
    with pytest.raises(DimensionMismatch):
        reconcile([1, 2, 3], bu, S41)


def test_ols_is_nearest_coherent_point():
    base = np.array([9.0, 1, 2, 3, 4])
    out = reconcile(base, ols_G(S41), S41)
    assert check_coherence(out, S41, tol=1e-8)
    assert out[0] != 9 and not np.allclose(out[1:], base[1:])
    best = np.linalg.norm(out - base)
    grid = np.linspace(0, 5, 11)
    for b in itertools.product(grid, repeat=4):
        assert best <= np.linalg.norm(S41 @ np.array(b) - base) + 1e-12


def test_top_down():
    m = top_down_G(S41, [0.1, 0.2, 0.3, 0.4])
    np.testing.assert_allclose(reconcile([10, 0, 0, 0, 0], m, S41), [10, 1, 2, 3, 4])
    with pytest.raises(DimensionMismatch):
        top_down_G(S41, [1.0])


def test_reconciled_trace_identity():
    W = random_spd(5, np.random.default_rng(3))
    G = mint_G(S41, WMatrix(W)).G
    SG = S41 @ G
    assert reconciled_trace(S41, G, W) == pytest.approx(np.trace(SG @ W @ SG.T))
