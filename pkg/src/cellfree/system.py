"""Per-drop simulation context and batched channel/estimate realizations."""

from dataclasses import dataclass, field

import numpy as np

from .channel import sample_channel
from .combining import error_cov_agg
from .errors import InvalidConfigError
from .estimation import estimate_channels, estimator_state, projected_pilot_signals

# complex entries held per batch; keeps a batch around a few hundred MB at most
BATCH_ENTRIES = 4_000_000


@dataclass(frozen=True)
class DropContext:
    """Everything about one network drop that stays fixed across trials."""

    stats: object
    plan: object
    sigma2: float
    powers: np.ndarray  # (K,) data power p_k in watts
    eta_u: np.ndarray   # (K, N) data power split
    tau_c: int
    state: object = field(default=None)
    Cprime: np.ndarray = field(default=None)

    @property
    def M(self):
        return self.stats.W.shape[0]

    @property
    def K(self):
        return self.stats.W.shape[1]

    @property
    def L(self):
        return self.stats.L

    @property
    def N(self):
        return self.stats.N

    @property
    def prelog(self):
        return 1.0 - self.plan.tau_p / self.tau_c


def make_context(stats, plan, sigma2, powers=0.2, eta_u=None, tau_c=200):
    """Build a :class:`DropContext`, computing the estimator state once."""
    M, K = stats.W.shape[:2]
    N = stats.N
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (K,)).copy()
    if eta_u is None:
        eta_u = np.full((K, N), 1.0 / N)
    eta_u = np.broadcast_to(np.asarray(eta_u, dtype=float), (K, N)).copy()
    if np.any(eta_u < 0) or np.any(eta_u.sum(axis=1) > 1.0 + 1e-12):
        raise InvalidConfigError("data power allocation must satisfy 0 <= sum <= 1")
    if np.any(powers < 0):
        raise InvalidConfigError("data power must be nonnegative")
    if plan.tau_p > tau_c:
        raise InvalidConfigError("tau_p exceeds tau_c")
    if not sigma2 > 0:
        raise InvalidConfigError("noise power must be positive")
    state = estimator_state(stats, plan, sigma2)
    Cprime = error_cov_agg(state, eta_u)
    return DropContext(stats, plan, float(sigma2), powers, eta_u, int(tau_c), state, Cprime)


def batch_size(ctx, per_trial_extra=0):
    per_trial = ctx.M * ctx.K * ctx.L * ctx.N * 3 + (ctx.M * ctx.L) ** 2 + per_trial_extra
    return max(1, BATCH_ENTRIES // max(per_trial, 1))


def realizations(ctx, trials, rng, noise_rng=None, batch=None):
    """Yield ``(H, Hhat)`` batches, each of shape ``(T, M, K, L, N)``.

    Channels are drawn from ``rng`` and pilot noise from ``noise_rng``
    (defaults to ``rng``). The batching does not affect the draws: the
    generators are consumed in the same order for any batch size only when
    ``batch`` is fixed, so callers that need bit-stability keep it fixed.
    """
    if trials < 1:
        raise InvalidConfigError("need at least one trial")
    noise_rng = rng if noise_rng is None else noise_rng
    batch = batch or batch_size(ctx)
    done = 0
    while done < trials:
        t = min(batch, trials - done)
        H = sample_channel(ctx.stats, rng, trials=t)
        y = projected_pilot_signals(H, ctx.plan, ctx.sigma2, noise_rng)
        yield H, estimate_channels(ctx.state, y, ctx.plan).Hhat
        done += t
