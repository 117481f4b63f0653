"""Jointly-correlated (Weichselberger) channel statistics and sampling.

Statistics are stored as arrays with arbitrary leading link dimensions,
typically ``(M, K)``. Vectorization follows column stacking, so entry
``n*L + a`` of ``vec(H)`` is antenna ``a`` of AP for UE antenna ``n``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidStatsError
from .linalg import blocks, herm, vec

MODELS = ("weichselberger", "kronecker", "uncorrelated")


@dataclass(frozen=True)
class ChannelStats:
    W: np.ndarray     # (..., L, N) coupling matrix, linear power, beta folded in
    U_r: np.ndarray   # (..., L, L)
    U_t: np.ndarray   # (..., N, N)
    R: np.ndarray     # (..., LN, LN)
    beta: np.ndarray  # (...)
    model: str = "weichselberger"

    @property
    def L(self):
        return self.W.shape[-2]

    @property
    def N(self):
        return self.W.shape[-1]

    @property
    def lambda_r(self):
        return self.W.sum(axis=-1)

    @property
    def lambda_t(self):
        return self.W.sum(axis=-2)

    @property
    def R_blocks(self):
        return blocks(self.R, self.N)

    def __getitem__(self, idx):
        return ChannelStats(self.W[idx], self.U_r[idx], self.U_t[idx], self.R[idx],
                            self.beta[idx], self.model)

    def save(self, path):
        np.savez(path, W=self.W, U_r=self.U_r, U_t=self.U_t, R=self.R, beta=self.beta,
                 model=np.array(self.model))

    @classmethod
    def load(cls, path):
        with np.load(path) as f:
            return cls(f["W"], f["U_r"], f["U_t"], f["R"], f["beta"], str(f["model"]))


def coupling_matrix_dominant(L, N, beta=1.0):
    """Coupling matrix with one dominant eigenpair holding half the power.

    Entry (0, 0) is ``beta*L*N/2``; every other entry is ``beta*a`` with
    ``a = L*N / (2*(L*N - 1))``. ``beta`` may be an array, in which case the
    result has shape ``beta.shape + (L, N)``.
    """
    beta = np.asarray(beta, dtype=float)
    LN = L * N
    if LN == 1:
        base = np.ones((1, 1))
    else:
        base = np.full((L, N), LN / (2.0 * (LN - 1)))
        base[0, 0] = LN / 2.0
    return beta[..., None, None] * base


def uncorrelated_coupling(L, N, beta=1.0):
    beta = np.asarray(beta, dtype=float)
    return beta[..., None, None] * np.ones((L, N))


def random_unitary(dim, rng, size=()):
    """Haar-distributed unitary matrices of shape ``size + (dim, dim)``.

    QR of a complex Gaussian matrix, with the phases of the triangular
    factor's diagonal moved into Q so the result is exactly Haar.
    """
    size = tuple(np.atleast_1d(size)) if size != () else ()
    z = (rng.standard_normal(size + (dim, dim)) + 1j * rng.standard_normal(size + (dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    phase = d / np.abs(d)
    return q * phase[..., None, :]


def dft_matrix(dim):
    k = np.arange(dim)
    return np.exp(-2j * np.pi * np.outer(k, k) / dim) / np.sqrt(dim)


def full_correlation(W, U_r, U_t):
    """``(U_t^* kron U_r) diag(vec W) (U_t^* kron U_r)^H``."""
    L, N = W.shape[-2], W.shape[-1]
    q = np.einsum("...ij,...ab->...iajb", np.conj(U_t), U_r)
    q = q.reshape(q.shape[:-4] + (L * N, L * N))
    w = vec(W)
    r = (q * w[..., None, :]) @ herm(q)
    return 0.5 * (r + herm(r))


def kronecker_coupling(W):
    """Rank-one coupling ``lambda_r lambda_t^T / (L N beta)`` from the sums of ``W``."""
    L, N = W.shape[-2], W.shape[-1]
    total = W.sum(axis=(-2, -1))
    lam_r = W.sum(axis=-1)
    lam_t = W.sum(axis=-2)
    safe = np.where(total > 0, total, 1.0)
    out = lam_r[..., :, None] * lam_t[..., None, :] / safe[..., None, None]
    return np.where(total[..., None, None] > 0, out, 0.0)


def kronecker_correlation(W, U_r, U_t):
    """``(R_t^T kron R_r) / (L N beta)`` from the one-sided correlations."""
    L, N = W.shape[-2], W.shape[-1]
    lam_r = W.sum(axis=-1)
    lam_t = W.sum(axis=-2)
    beta = W.sum(axis=(-2, -1)) / (L * N)
    R_r = (U_r * lam_r[..., None, :]) @ herm(U_r)
    R_t = (U_t * lam_t[..., None, :]) @ herm(U_t)
    k = np.einsum("...ij,...ab->...iajb", np.swapaxes(R_t, -1, -2), R_r)
    k = k.reshape(k.shape[:-4] + (L * N, L * N))
    return k / (L * N * beta[..., None, None])


def build_stats(model, W, U_r, U_t):
    """Assemble :class:`ChannelStats` for one of the supported models."""
    W = np.asarray(W, dtype=float)
    if model not in MODELS:
        raise InvalidStatsError(f"unknown channel model {model!r}")
    if np.any(W < 0):
        raise InvalidStatsError("coupling matrix has negative entries")
    L, N = W.shape[-2], W.shape[-1]
    beta = W.sum(axis=(-2, -1)) / (L * N)
    if model == "kronecker":
        W = kronecker_coupling(W)
    elif model == "uncorrelated":
        W = np.broadcast_to(beta[..., None, None], W.shape).copy()
    if model == "uncorrelated":
        eye = np.eye(L * N)
        R = beta[..., None, None] * eye
    else:
        R = full_correlation(W, U_r, U_t)
    return ChannelStats(W, np.asarray(U_r), np.asarray(U_t), R, beta, model)


def draw_stats(beta, L, N, rng, model="weichselberger"):
    """Default statistics for every link in ``beta``: random eigenbases plus
    the dominant-eigenpair coupling matrix."""
    beta = np.asarray(beta, dtype=float)
    W = coupling_matrix_dominant(L, N, beta)
    U_r = random_unitary(L, rng, beta.shape)
    U_t = random_unitary(N, rng, beta.shape)
    return build_stats(model, W, U_r, U_t)


def sample_channel(stats, rng, trials=None):
    """Draw ``H = U_r (sqrt(W) * H_iid) U_t^H``.

    Output shape is ``stats.W.shape`` or ``(trials,) + stats.W.shape``.
    """
    shape = stats.W.shape if trials is None else (trials,) + stats.W.shape
    h_iid = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return stats.U_r @ (np.sqrt(stats.W) * h_iid) @ herm(stats.U_t)


def block_of(R, n, i, L):
    """The ``(n, i)`` ``L x L`` block of ``R`` (zero-based indices)."""
    N = R.shape[-1] // L
    if not (0 <= n < N and 0 <= i < N):
        raise IndexError(f"block index ({n}, {i}) out of range for N={N}")
    return R[..., n * L:(n + 1) * L, i * L:(i + 1) * L]
