import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cellfree import combining, lsfd, se_engine, system
from cellfree.errors import InvalidConfigError, NumericalError

from conftest import make_ctx


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def draw(ctx, trials, seed):
    return next(system.realizations(ctx, trials, np.random.default_rng(seed), batch=trials))


# -- logdet_sinr ----------------------------------------------------------------

def test_logdet_zero_signal():
    assert se_engine.logdet_sinr(np.zeros((2, 2)), np.eye(2)) == 0.0
    # singular Sigma is tolerated when D vanishes
    assert se_engine.logdet_sinr(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0


def test_logdet_scalar():
    val = se_engine.logdet_sinr(np.array([[2.0]]), np.array([[0.5]]))
    assert val == pytest.approx(np.log2(1 + 4 / 0.5), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_logdet_matches_naive(n, m, seed):
    rng = np.random.default_rng(seed)
    D = crandn(rng, n, m)
    B = crandn(rng, n, n)
    Sigma = B @ B.conj().T + 0.1 * np.eye(n)
    ref = np.log2(np.linalg.det(np.eye(m) + D.conj().T @ np.linalg.inv(Sigma) @ D).real)
    assert se_engine.logdet_sinr(D, Sigma) == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_logdet_indefinite_raises():
    with pytest.raises(NumericalError):
        se_engine.logdet_sinr(np.ones((2, 1)), np.diag([1.0, -5.0]))


def test_batch_means_stderr():
    vals = np.repeat(np.arange(10.0), 5)[:, None]
    err = se_engine.batch_means_stderr(vals)
    assert err[0] == pytest.approx(np.std(np.arange(10.0), ddof=1) / np.sqrt(10))
    assert np.isnan(se_engine.batch_means_stderr(np.ones((5, 2)))).all()


# -- per-realization dominance ---------------------------------------------------

@pytest.mark.parametrize("seed", range(4))
def test_level4_mmse_dominates_mr(seed):
    ctx = make_ctx(M=3, K=3, L=4, N=2, tau_p=4, seed=seed)
    _, Hhat = draw(ctx, 200, seed)
    mmse = se_engine.level4_batch(ctx, Hhat, "MMSE")
    mr = se_engine.level4_batch(ctx, Hhat, "MR")
    assert np.all(mmse >= mr - 1e-9)
    assert np.mean(mmse - mr) > 1e-3


@pytest.mark.parametrize("seed", range(4))
def test_level1_lmmse_dominates_mr(seed):
    ctx = make_ctx(M=3, K=3, L=4, N=2, tau_p=4, seed=seed)
    _, Hhat = draw(ctx, 200, seed)
    lmmse = se_engine.level1_batch(ctx, Hhat, "LMMSE")
    mr = se_engine.level1_batch(ctx, Hhat, "MR")
    assert np.all(lmmse >= mr - 1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_level4_two_paths_agree(seed):
    ctx = make_ctx(M=3, K=3, L=2, N=2, tau_p=2, seed=seed)
    _, Hhat = draw(ctx, 200, seed)
    a = se_engine.level4_batch(ctx, Hhat, "MMSE")
    b = se_engine.level4_direct_values(Hhat, combining.interference_matrix_central(
        Hhat, ctx.Cprime, ctx.powers, ctx.eta_u, ctx.sigma2), ctx.powers, ctx.eta_u)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)


def test_level1_single_ap_perfect_estimate_formula():
    rng = np.random.default_rng(0)
    L, N, p, s2 = 3, 2, 2.0, 0.3
    eta = np.array([[0.3, 0.7]])
    Hhat = crandn(rng, 5, 1, 1, L, N)
    Xi = combining.interference_matrix_local(Hhat, np.zeros((1, 1, L, L)), np.array([p]), eta, s2)
    V = combining.mr_combiner(Hhat).local
    got = se_engine.level1_values(Hhat, V, Xi, np.array([p]), eta)[:, 0, 0]
    P = np.diag(np.sqrt(eta[0]))
    for t in range(5):
        G = Hhat[t, 0, 0].conj().T @ Hhat[t, 0, 0]
        ref = np.log2(np.linalg.det(np.eye(N) + p / s2 * P @ G @ P).real)
        assert got[t] == pytest.approx(ref, rel=1e-10)


def test_se_decreases_with_noise():
    out = []
    for s2 in (0.1, 1.0, 10.0):
        ctx = make_ctx(M=3, K=2, L=2, N=2, seed=1, sigma2=s2)
        out.append(se_engine.se_level4_mc(ctx, "MMSE", 2000, np.random.default_rng(0)).se)
    assert np.all(out[0] > out[1]) and np.all(out[1] > out[2])


def test_prelog_applied():
    ctx = make_ctx(M=2, K=2, seed=2, tau_c=100)
    other = dataclasses.replace(ctx, tau_c=4)
    a = se_engine.se_level4_mc(ctx, "MR", 500, np.random.default_rng(0))
    b = se_engine.se_level4_mc(other, "MR", 500, np.random.default_rng(0))
    assert a.prelog == pytest.approx(0.98) and b.prelog == pytest.approx(0.5)
    np.testing.assert_allclose(b.se / a.se, 0.5 / 0.98, rtol=1e-12)


# -- Levels 3 and 2 -----------------------------------------------------------------

@pytest.mark.parametrize("scheme", ["MR", "LMMSE"])
def test_level3_optimal_dominates_uniform_equals_level2(scheme):
    ctx = make_ctx(M=4, K=3, L=2, N=2, tau_p=4, seed=7)
    mom = lsfd.estimate_moments(ctx, scheme, 3000, np.random.default_rng(1))
    opt = se_engine.se_level3_mc(ctx, scheme, "optimal", moments=mom).se
    uni = se_engine.se_level3_mc(ctx, scheme, "uniform", moments=mom).se
    l2 = se_engine.se_level2_mc(ctx, scheme, moments=mom)
    assert l2.level == 2
    np.testing.assert_allclose(l2.se, uni, rtol=1e-9)
    assert np.all(opt >= uni - 1e-9)


def test_unknown_modes_rejected():
    ctx = make_ctx(M=1, K=1)
    mom = lsfd.estimate_moments(ctx, "MR", 20, np.random.default_rng(0))
    with pytest.raises(InvalidConfigError):
        se_engine.se_level3_mc(ctx, "MR", "greedy", moments=mom)
    _, Hhat = draw(ctx, 2, 0)
    with pytest.raises(InvalidConfigError):
        se_engine.level4_batch(ctx, Hhat, "LMMSE")
    with pytest.raises(InvalidConfigError):
        se_engine.local_combiner(ctx, Hhat, "MMSE")


# -- whole-drop runs ------------------------------------------------------------------

def _all(ctx, seed):
    return se_engine.se_all_mc(ctx, [1, 2, 3, 4], ["mmse", "mr"], 400, 2000,
                               np.random.default_rng(seed), np.random.default_rng(seed + 1))


def test_se_all_reproducible():
    ctx = make_ctx(M=3, K=2, seed=4)
    a, b = _all(ctx, 9), _all(ctx, 9)
    assert a.keys() == b.keys() == {(lv, f) for lv in (1, 2, 3, 4) for f in ("mmse", "mr")}
    for key in a:
        np.testing.assert_array_equal(a[key].se, b[key].se)


def test_average_level_ordering():
    """Averaged over drops, more cooperation gives more SE."""
    totals = {}
    for seed in range(10):
        ctx = make_ctx(M=6, K=4, L=2, N=2, tau_p=4, seed=100 + seed)
        for key, rep in _all(ctx, seed).items():
            totals[key] = totals.get(key, 0.0) + rep.se.mean() / 10
    for fam in ("mmse", "mr"):
        assert totals[(4, fam)] > totals[(3, fam)] > totals[(2, fam)]
    assert totals[(4, "mmse")] > totals[(4, "mr")]
