import numpy as np
import pytest

from cellfree import channel, estimation, lsfd, system
from cellfree.linalg import herm


def make_ctx(M=4, K=2, L=2, N=2, tau_p=None, seed=0, sigma2=0.5, power=1.0,
             model="weichselberger", beta=None, omega=None, eta_u=None, tau_c=200):
    """Small drop with random eigenbases; the default ``tau_p = N`` puts every UE on one pilot."""
    rng = np.random.default_rng(seed)
    if beta is None:
        beta = 10.0 ** rng.uniform(-1.0, 1.0, (M, K))
    stats = channel.draw_stats(np.asarray(beta, dtype=float), L, N, rng, model)
    plan = estimation.assign_pilots(K, N, N if tau_p is None else tau_p, pilot_power=power,
                                    omega=omega)
    return system.make_context(stats, plan, sigma2, powers=power, eta_u=eta_u, tau_c=tau_c)


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def mc_pair_moments(ctx, trials, seed):
    """Sample means of ``Hhat_k^H Hhat_l`` and ``Hhat_k^H H_l P_l H_l^H Hhat_k`` for all (m, k, l)."""
    M, K, N = ctx.M, ctx.K, ctx.N
    lam = np.zeros((M, K, K, N, N), dtype=complex)
    gam = np.zeros((M, K, K, N, N), dtype=complex)
    for H, Hh in system.realizations(ctx, trials, np.random.default_rng(seed)):
        lam += np.einsum("tmkan,tmlab->mklnb", np.conj(Hh), Hh)
        X = herm(Hh)[:, :, :, None] @ H[:, :, None]
        gam += np.einsum("tmklab,lb,tmklcb->mklac", X, ctx.eta_u, np.conj(X))
    return lam / trials, gam / trials


@pytest.fixture(scope="session")
def oracle_ctx():
    """M=4, K=2 sharing one pilot, L=N=2, dominant-eigenpair coupling matrix."""
    return make_ctx(seed=3)


@pytest.fixture(scope="session")
def mr_moments(oracle_ctx):
    """Monte-Carlo MR moments at 2e4 trials."""
    return lsfd.estimate_moments(oracle_ctx, "MR", 20_000, np.random.default_rng(11))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def verdict(name, checks):
        ok = all(passed for _, passed in checks)
        detail = "; ".join(f"{'ok' if passed else 'FAIL'} {what}" for what, passed in checks)
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        print(lines[-1])
        assert ok, detail

    return verdict


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
