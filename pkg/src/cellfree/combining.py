"""Receive combining: MR and MMSE at the CPU, MR and local MMSE at each AP.

Local arrays have shape ``(T, M, K, L, N)``; collective (CPU-level) arrays
stack the APs along the antenna axis into ``(T, K, M*L, N)``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import block_diag, check_hermitian, hpd_solve

SCHEMES = ("MR", "MMSE", "LMMSE")


@dataclass(frozen=True)
class CombinerSet:
    scheme: str
    level4: Optional[np.ndarray] = None  # (T, K, ML, N)
    local: Optional[np.ndarray] = None   # (T, M, K, L, N)


def error_cov_agg(state, eta_u):
    """``C'_ml = sum_n eta_ln C_ml^{nn}`` for every link, shape ``(M, K, L, L)``."""
    cb = state.C_blocks  # (M, K, N, N, L, L)
    diag = np.diagonal(cb, axis1=2, axis2=3)  # (M, K, L, L, N)
    return np.einsum("mkabn,kn->mkab", diag, eta_u)


def stack_collective(local):
    """``(T, M, K, L, N)`` -> ``(T, K, M*L, N)``."""
    T, M, K, L, N = local.shape
    return np.moveaxis(local, -4, -3).reshape(T, K, M * L, N)


def _weighted_gram(Hhat, powers, eta_u):
    """``sum_l p_l Hhat_l P_l Hhat_l^H`` over the UE axis (second to last of the batch)."""
    w = powers[:, None] * eta_u  # (K, N)
    return np.einsum("...kan,kn,...kbn->...ab", Hhat, w, np.conj(Hhat))


def interference_matrix_central(Hhat, Cprime, powers, eta_u, sigma2):
    """``sum_l p_l (Hhat_l P_l Hhat_l^H + C'_l) + sigma2 I`` at the CPU, shape ``(T, ML, ML)``."""
    Hc = stack_collective(Hhat)
    T, K, ML, N = Hc.shape
    cagg = np.einsum("k,mkab->mab", powers, Cprime)
    A = _weighted_gram(Hc, powers, eta_u) + block_diag(cagg)[None] + sigma2 * np.eye(ML)
    return A


def interference_matrix_local(Hhat, Cprime, powers, eta_u, sigma2):
    """Per-AP counterpart of :func:`interference_matrix_central`, shape ``(T, M, L, L)``."""
    L = Hhat.shape[-2]
    w = powers[:, None] * eta_u
    gram = np.einsum("tmkan,kn,tmkbn->tmab", Hhat, w, np.conj(Hhat))
    cagg = np.einsum("k,mkab->mab", powers, Cprime)
    return gram + cagg[None] + sigma2 * np.eye(L)


def mr_combiner(Hhat):
    return CombinerSet("MR", level4=stack_collective(Hhat), local=Hhat)


def mmse_combiner_central(Hhat, Cprime, powers, eta_u, sigma2):
    """``V_k = p_k A^{-1} Hhat_k P_k`` with one factorization of ``A`` per realization."""
    A = interference_matrix_central(Hhat, Cprime, powers, eta_u, sigma2)
    check_hermitian(A)
    Hc = stack_collective(Hhat)  # (T, K, ML, N)
    T, K, ML, N = Hc.shape
    rhs = np.moveaxis(Hc * (powers[:, None] * eta_u)[None, :, None, :], 1, 2).reshape(T, ML, K * N)
    V = hpd_solve(A, rhs).reshape(T, ML, K, N)
    return CombinerSet("MMSE", level4=np.moveaxis(V, 2, 1))


def lmmse_combiner_local(Hhat, Cprime, powers, eta_u, sigma2):
    """``V_mk = p_k A_m^{-1} Hhat_mk P_k`` from AP-local estimates only."""
    A = interference_matrix_local(Hhat, Cprime, powers, eta_u, sigma2)
    check_hermitian(A)
    T, M, K, L, N = Hhat.shape
    rhs = np.moveaxis(Hhat * (powers[:, None] * eta_u)[None, None, :, None, :], 2, 3)
    V = hpd_solve(A, rhs.reshape(T, M, L, K * N)).reshape(T, M, L, K, N)
    return CombinerSet("LMMSE", local=np.moveaxis(V, 3, 2))
