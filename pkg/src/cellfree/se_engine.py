"""Spectral efficiency for the four AP-cooperation levels.

Levels 4 and 1 average an instantaneous log-det over channel realizations.
Levels 3 and 2 evaluate one log-det on second-order moments that are
estimated first (see :mod:`cellfree.lsfd`).
"""

from dataclasses import dataclass

import numpy as np

from . import lsfd
from .combining import (
    interference_matrix_central,
    interference_matrix_local,
    lmmse_combiner_local,
    mmse_combiner_central,
    mr_combiner,
    stack_collective,
)
from .errors import InvalidConfigError, NumericalError
from .linalg import herm, hpd_solve, logdet_hpd, symmetrize
from .system import realizations

N_BATCHES = 10
LOG2E = 1.0 / np.log(2.0)


@dataclass(frozen=True)
class SEReport:
    level: int
    scheme: str
    se: np.ndarray      # (K,) bits/s/Hz, prelog applied
    stderr: np.ndarray  # (K,) batch-means standard error, nan when not applicable
    trials: int
    prelog: float


def logdet_sinr(D, Sigma):
    """``log2 det(I + D^H Sigma^{-1} D)`` for Hermitian positive definite ``Sigma``.

    Uses ``det(Sigma + D D^H) / det(Sigma)`` with two Cholesky factors; no
    inverse is formed. Entries whose ``D`` is identically zero return 0 even
    if ``Sigma`` is singular there.
    """
    D = np.asarray(D)
    Sigma = np.asarray(Sigma)
    zero = ~np.any(D != 0, axis=(-2, -1))
    if np.any(zero):
        eye = np.eye(Sigma.shape[-1])
        Sigma = np.where(zero[..., None, None], eye, Sigma)
    Sigma = symmetrize(Sigma)
    out = (logdet_hpd(Sigma + D @ herm(D)) - logdet_hpd(Sigma)) * LOG2E
    out = np.where(zero, 0.0, out)
    return np.maximum(out, 0.0) if out.ndim else max(float(out), 0.0)


def batch_means_stderr(values, n_batches=N_BATCHES):
    """Standard error of the mean over axis 0 via batch means."""
    T = values.shape[0]
    if T < n_batches:
        return np.full(values.shape[1:], np.nan)
    usable = T - T % n_batches
    means = values[:usable].reshape((n_batches, -1) + values.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


# -- Level 4 ------------------------------------------------------------------

def level4_values(Hhat, V, Xi, powers, eta_u):
    """Per-realization log-det of the centralized bound, shape ``(T, K)``.

    ``V`` is ``(T, K, ML, N)`` and ``Xi`` the full interference-plus-noise
    matrix ``(T, ML, ML)`` including every UE's own signal.
    """
    Hc = stack_collective(Hhat)
    sq = np.sqrt(powers[:, None] * eta_u)  # (K, N) sqrt(p_k) P_k^(1/2)
    D = herm(V) @ Hc * sq[None, :, None, :]
    Sigma = herm(V) @ Xi[:, None] @ V - D @ herm(D)
    return logdet_sinr(D, Sigma)


def level4_direct_values(Hhat, Xi, powers, eta_u):
    """``log2 det(I + p_k Hhat_k^H Xi_k^{-1} Hhat_k P_k)`` with ``Xi_k`` excluding UE k."""
    Hc = stack_collective(Hhat)  # (T, K, ML, N)
    sq = np.sqrt(powers[:, None] * eta_u)
    X = Hc * sq[None, :, None, :]  # sqrt(p_k) Hhat_k P_k^(1/2)
    Xi_k = Xi[:, None] - X @ herm(X)
    Y = herm(X) @ hpd_solve(Xi_k, X)
    eye = np.eye(Y.shape[-1])
    return logdet_hpd(eye + symmetrize(Y)) * LOG2E


def level4_batch(ctx, Hhat, scheme):
    Xi = interference_matrix_central(Hhat, ctx.Cprime, ctx.powers, ctx.eta_u, ctx.sigma2)
    if scheme == "MR":
        V = mr_combiner(Hhat).level4
    elif scheme == "MMSE":
        V = mmse_combiner_central(Hhat, ctx.Cprime, ctx.powers, ctx.eta_u, ctx.sigma2).level4
    else:
        raise InvalidConfigError(f"Level 4 supports MR and MMSE, not {scheme!r}")
    return level4_values(Hhat, V, Xi, ctx.powers, ctx.eta_u)


def se_level4_mc(ctx, scheme, trials, rng, noise_rng=None, batch=None):
    vals = np.concatenate([level4_batch(ctx, Hhat, scheme)
                           for _, Hhat in realizations(ctx, trials, rng, noise_rng, batch)])
    return SEReport(4, scheme, ctx.prelog * vals.mean(axis=0),
                    ctx.prelog * batch_means_stderr(vals), trials, ctx.prelog)


# -- Level 1 ------------------------------------------------------------------

def level1_values(Hhat, V, Xi_local, powers, eta_u):
    """Per-realization, per-AP log-det of the small-cell bound, shape ``(T, M, K)``."""
    sq = np.sqrt(powers[:, None] * eta_u)
    D = herm(V) @ Hhat * sq[None, None, :, None, :]
    Sigma = herm(V) @ Xi_local[:, :, None] @ V - D @ herm(D)
    return logdet_sinr(D, Sigma)


def local_combiner(ctx, Hhat, scheme):
    if scheme == "MR":
        return mr_combiner(Hhat).local
    if scheme == "LMMSE":
        return lmmse_combiner_local(Hhat, ctx.Cprime, ctx.powers, ctx.eta_u, ctx.sigma2).local
    raise InvalidConfigError(f"local combining supports MR and LMMSE, not {scheme!r}")


def level1_batch(ctx, Hhat, scheme):
    Xi = interference_matrix_local(Hhat, ctx.Cprime, ctx.powers, ctx.eta_u, ctx.sigma2)
    return level1_values(Hhat, local_combiner(ctx, Hhat, scheme), Xi, ctx.powers, ctx.eta_u)


def se_level1_mc(ctx, scheme, trials, rng, noise_rng=None, batch=None):
    """Best-AP selection: average per AP first, then take the max over APs."""
    vals = np.concatenate([level1_batch(ctx, Hhat, scheme)
                           for _, Hhat in realizations(ctx, trials, rng, noise_rng, batch)])
    per_ap = vals.mean(axis=0)  # (M, K)
    best = np.argmax(per_ap, axis=0)
    K = per_ap.shape[1]
    err = batch_means_stderr(vals)[best, np.arange(K)]
    return SEReport(1, scheme, ctx.prelog * per_ap[best, np.arange(K)], ctx.prelog * err,
                    trials, ctx.prelog)


# -- Levels 3 and 2 -----------------------------------------------------------

def se_level3_mc(ctx, scheme, lsfd_mode="optimal", moment_trials=10_000, rng=None,
                 noise_rng=None, batch=None, moments=None, level=3):
    """Level 3 SE from Monte-Carlo moments; pass ``moments`` to reuse an estimate."""
    if moments is None:
        moments = lsfd.estimate_moments(ctx, scheme, moment_trials, rng, noise_rng, batch)
    if lsfd_mode == "optimal":
        A = lsfd.optimal_lsfd(moments, ctx.powers, ctx.eta_u, ctx.sigma2)
    elif lsfd_mode == "uniform":
        A = lsfd.uniform_lsfd(ctx.M, ctx.N, ctx.K)
    else:
        raise InvalidConfigError(f"unknown LSFD mode {lsfd_mode!r}")
    vals = lsfd.se_from_moments(moments, A, ctx.powers, ctx.eta_u, ctx.sigma2)
    return SEReport(level, scheme, ctx.prelog * vals,
                    np.full(ctx.K, np.nan), moments.trials, ctx.prelog)


def se_level2_mc(ctx, scheme, moment_trials=10_000, rng=None, noise_rng=None, batch=None,
                 moments=None):
    """Level 2 is Level 3 with every LSFD block equal to ``I/M``."""
    return se_level3_mc(ctx, scheme, "uniform", moment_trials, rng, noise_rng, batch, moments,
                        level=2)


def se_all_mc(ctx, levels, schemes, trials, moment_trials, rng, noise_rng=None,
              lsfd_mode="optimal"):
    """Run the requested (level, scheme) cells on one drop.

    ``schemes`` uses the family names ``mmse`` (MMSE at the CPU, L-MMSE at
    the APs) and ``mr``. ``lsfd_mode`` selects the Level 3 weights.
    Returns ``{(level, family): SEReport}``; a cell whose
    computation fails numerically maps to the raised :class:`NumericalError`.
    """
    out = {}
    for family in schemes:
        local = "LMMSE" if family == "mmse" else "MR"
        moments = None
        for level in sorted(levels, reverse=True):
            try:
                if level == 4:
                    out[(4, family)] = se_level4_mc(ctx, "MMSE" if family == "mmse" else "MR",
                                                    trials, rng, noise_rng)
                elif level in (2, 3):
                    if moments is None:
                        moments = lsfd.estimate_moments(ctx, local, moment_trials, rng, noise_rng)
                    mode = lsfd_mode if level == 3 else "uniform"
                    out[(level, family)] = se_level3_mc(ctx, local, mode, moments=moments,
                                                        level=level)
                elif level == 1:
                    out[(1, family)] = se_level1_mc(ctx, local, trials, rng, noise_rng)
                else:
                    raise InvalidConfigError(f"unknown level {level}")
            except NumericalError as exc:
                out[(level, family)] = exc
    return out
