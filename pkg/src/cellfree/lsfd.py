"""Large-scale fading decoding: second-layer weights built from statistics.

For UE ``k`` the CPU sees the stacked local estimates through
``G_kl = [V_1k^H H_1l; ...; V_Mk^H H_Ml]`` (shape ``MN x N``). Only the moments
``E{G_kk}``, ``E{G_kl P_l G_kl^H}`` and ``S_k = blockdiag(E{V_mk^H V_mk})``
enter the SE, so they are estimated once and reused.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, NumericalError
from .linalg import block_diag, herm, hpd_solve, symmetrize
from .system import batch_size, realizations


@dataclass(frozen=True)
class GMoments:
    Egkk: np.ndarray  # (K, MN, N)
    Egg: np.ndarray   # (K, K, MN, MN) E{G_kl P_l G_kl^H}
    Sk: np.ndarray    # (K, MN, MN) block diagonal
    trials: int
    M: int
    N: int

    def total_interference(self, powers):
        """``sum_l p_l E{G_kl P_l G_kl^H}`` for every k, shape ``(K, MN, MN)``."""
        return np.einsum("l,klab->kab", powers, self.Egg)


def stack_g(V, H, k, l):
    """``G_kl`` for a batch: ``V`` and ``H`` are ``(T, M, K, L, N)``; result ``(T, M*N, N)``."""
    g = herm(V[:, :, k]) @ H[:, :, l]  # (T, M, N, N)
    T, M, N, _ = g.shape
    return g.reshape(T, M * N, N)


def stack_g_all(V, H):
    """Every ``G_kl`` at once, shape ``(T, K, K, M*N, N)``."""
    g = np.einsum("tmkan,tmlab->tklmnb", np.conj(V), H)
    T, K, _, M, N, _ = g.shape
    return g.reshape(T, K, K, M * N, N)


class MomentAccumulator:
    """Running sums of the G moments; two accumulators merge by adding sums."""

    def __init__(self, M, K, N):
        MN = M * N
        self.M, self.K, self.N = M, K, N
        self.sum_g = np.zeros((K, MN, N), dtype=complex)
        self.sum_gg = np.zeros((K, K, MN, MN), dtype=complex)
        self.sum_vv = np.zeros((K, M, N, N), dtype=complex)
        self.count = 0

    def add(self, V, H, eta_u):
        T, M, K, L, N = H.shape
        G = stack_g_all(V, H)
        idx = np.arange(K)
        self.sum_g += G[:, idx, idx].sum(axis=0)
        Gs = G * np.sqrt(eta_u)[None, None, :, None, :]
        # (K, K, MN, T*N) so that the sum over trials is one GEMM per (k, l)
        X = np.moveaxis(Gs, 0, 3).reshape(K, K, M * N, T * N)
        self.sum_gg += X @ herm(X)
        self.sum_vv += np.einsum("tmkan,tmkab->kmnb", np.conj(V), V)
        self.count += T

    def merge(self, other):
        out = MomentAccumulator(self.M, self.K, self.N)
        out.sum_g = self.sum_g + other.sum_g
        out.sum_gg = self.sum_gg + other.sum_gg
        out.sum_vv = self.sum_vv + other.sum_vv
        out.count = self.count + other.count
        return out

    def moments(self):
        if self.count == 0:
            raise InvalidConfigError("no trials accumulated")
        c = self.count
        return GMoments(Egkk=self.sum_g / c, Egg=symmetrize(self.sum_gg / c),
                        Sk=block_diag(symmetrize(self.sum_vv / c)), trials=c, M=self.M, N=self.N)


def estimate_moments(ctx, scheme, trials, rng, noise_rng=None, batch=None):
    """Sample means of ``G_kk``, ``G_kl P_l G_kl^H`` and ``V_mk^H V_mk``."""
    from .se_engine import local_combiner

    if trials < 1:
        raise InvalidConfigError("moment estimation needs at least one trial")
    acc = MomentAccumulator(ctx.M, ctx.K, ctx.N)
    extra = ctx.K * ctx.K * ctx.M * ctx.N * ctx.N * 2
    batch = batch or batch_size(ctx, extra)
    for H, Hhat in realizations(ctx, trials, rng, noise_rng, batch):
        acc.add(local_combiner(ctx, Hhat, scheme), H, ctx.eta_u)
    return acc.moments()


def optimal_lsfd(moments, powers, eta_u, sigma2):
    """``A_k = p_k (sum_l p_l E{G P G^H} + sigma2 S_k)^{-1} E{G_kk} P_k``."""
    B = symmetrize(moments.total_interference(powers) + sigma2 * moments.Sk)
    rhs = moments.Egkk * (powers[:, None] * eta_u)[:, None, :]
    try:
        return hpd_solve(B, rhs)
    except NumericalError as exc:
        cond = np.linalg.cond(B)
        raise NumericalError(f"LSFD system is singular (condition numbers {cond})") from exc


def uniform_lsfd(M, N, K=1):
    """Every block ``A_mk = I/M``; shape ``(K, M*N, N)``."""
    if M < 1 or N < 1:
        raise InvalidConfigError("M and N must be positive")
    A = np.tile(np.eye(N) / M, (M, 1)).astype(complex)
    return np.broadcast_to(A, (K, M * N, N)).copy()


def level3_matrices(moments, A, powers, eta_u, sigma2):
    """``D_k`` and ``Sigma_k`` of the two-layer bound for weights ``A`` ``(K, MN, N)``."""
    sq = np.sqrt(powers[:, None] * eta_u)
    D = herm(A) @ moments.Egkk * sq[:, None, :]
    total = moments.total_interference(powers) + sigma2 * moments.Sk
    Sigma = herm(A) @ total @ A - D @ herm(D)
    return D, symmetrize(Sigma)


def se_from_moments(moments, A, powers, eta_u, sigma2):
    """Per-UE log-det (no prelog) of the two-layer bound."""
    from .se_engine import logdet_sinr

    D, Sigma = level3_matrices(moments, A, powers, eta_u, sigma2)
    return logdet_sinr(D, Sigma)
