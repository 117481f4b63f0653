"""Closed-form moments and SE for MR combining at Levels 3 and 2.

With ``V_mk = Hhat_mk`` all expectations in the two-layer bound reduce to
traces of blocks of the correlation and estimate-covariance matrices. The
results plug into the same log-det evaluator as the Monte-Carlo moments
(:class:`cellfree.lsfd.GMoments`), so both paths share everything downstream.
"""

from dataclasses import dataclass

import numpy as np

from . import lsfd
from .errors import InvalidConfigError
from .linalg import blocks, herm, hermitian_sqrt, symmetrize

GAMMA2_VARIANTS = ("exact", "shared_root")


def _trace_prod(a, b):
    """``tr(A B)`` over the trailing two axes with broadcasting."""
    return np.einsum("...ab,...ba->...", a, b)


def z_matrix(Rhat, N):
    """``[Z]_{n n'} = tr(Rhat^{n' n})``, i.e. ``E{Hhat^H Hhat}``."""
    return np.swapaxes(np.trace(blocks(Rhat, N), axis1=-2, axis2=-1), -1, -2)


def _omega_sqrt(plan, L, k):
    return plan.omega_tilde_sqrt(L)[k]


def theta(ctx, m, k, l):
    """``E{hhat_ml hhat_mk^H}`` for co-pilot UEs ``k`` and ``l`` at AP ``m``."""
    plan = ctx.plan
    if plan.group_of[k] != plan.group_of[l]:
        raise InvalidConfigError(f"UEs {k} and {l} do not share a pilot")
    if k == l:
        return ctx.state.Rhat[m, k]
    L = ctx.L
    dk, dl = _omega_sqrt(plan, L, k), _omega_sqrt(plan, L, l)
    R = ctx.stats.R
    # Psi_mk^{-1} R_mk Om_k^(1/2) is the conjugate transpose of S_mk
    right = herm(ctx.state.S[m, k])
    scale = np.sqrt(plan.pilot_power[k] * plan.pilot_power[l]) * plan.tau_p
    return scale * dl[:, None] * (R[m, l] @ right)


def lambda_matrix(ctx, m, k, l):
    """``E{Hhat_mk^H H_ml}``: entry ``(n, n')`` is ``tr(Theta_mkl^{n' n})``."""
    if k == l:
        return z_matrix(ctx.state.Rhat[m, k], ctx.N)
    return z_matrix(theta(ctx, m, k, l), ctx.N)


def gamma1(ctx, m, k, l):
    """``E{Hhat_mk^H H_ml P_l H_ml^H Hhat_mk}`` when ``l`` does not share ``k``'s pilot.

    Entry ``(n, n')`` is ``sum_i eta_li tr(R_ml^{ii} Rhat_mk^{n' n})``.
    """
    N = ctx.N
    Rb = blocks(ctx.stats.R[m, l], N)
    Q = np.einsum("i,iiab->ab", ctx.eta_u[l], Rb)
    Hb = blocks(ctx.state.Rhat[m, k], N)
    return np.swapaxes(_trace_prod(Q, Hb), -1, -2)


def gamma1_all(ctx):
    """:func:`gamma1` for every ``(m, k, l)``, shape ``(M, K, K, N, N)``."""
    N = ctx.N
    Rb = ctx.stats.R_blocks  # (M, K, N, N, L, L)
    Q = np.einsum("li,mliiab->mlab", ctx.eta_u, Rb)
    Hb = ctx.state.Rhat_blocks
    return np.einsum("mlab,mkpnba->mklnp", Q, Hb)


def _f_matrices(ctx, m, k, l):
    plan = ctx.plan
    L = ctx.L
    S = ctx.state.S[m, k]
    dl = _omega_sqrt(plan, L, l)
    Rl = ctx.stats.R[m, l]
    B = S * dl[None, :]  # S_mk Om_l^(1/2)
    inner = plan.pilot_power[l] * plan.tau_p ** 2 * (dl[:, None] * Rl * dl[None, :])
    F1 = symmetrize(plan.tau_p * S @ ctx.state.Psi[m, k] @ herm(S) - S @ inner @ herm(S))
    F2 = symmetrize(B @ Rl @ herm(B))
    return F1, F2, B


def f1_expanded(ctx, m, k, l):
    """``tau_p S (Psi - p_l tau_p Om_l^(1/2) R_ml Om_l^(1/2)) S^H``, the factored form of F1."""
    plan = ctx.plan
    dl = _omega_sqrt(plan, ctx.L, l)
    S = ctx.state.S[m, k]
    Rl = ctx.stats.R[m, l]
    mid = ctx.state.Psi[m, k] - plan.pilot_power[l] * plan.tau_p * (dl[:, None] * Rl * dl[None, :])
    return plan.tau_p * S @ mid @ herm(S)


def gamma2(ctx, m, k, l, variant="exact"):
    """``E{Hhat_mk^H H_ml P_l H_ml^H Hhat_mk}`` for co-pilot UEs ``k`` and ``l``.

    The estimate splits into ``sqrt(p_k) S_mk x`` (independent of ``h_ml``)
    plus ``sqrt(p_k p_l) tau_p B h_ml`` with ``B = S_mk Om_l^(1/2)``. The first
    part contributes ``p_k tr(R^{ii} F1^{n'n})``. The second is a fourth
    moment of ``h_ml``:

    * ``exact`` evaluates it by Isserlis' theorem on the joint law of
      ``(B h, h)``: ``tr(R^{ii} F2^{n'n}) + conj(t_ni) t_n'i`` with
      ``t_ni = tr([B R]^{ni})``.
    * ``shared_root`` uses square roots of ``F2`` and ``R`` driven by one shared white
      vector, which reproduces the marginals of ``B h`` and ``h`` but not their
      cross-covariance unless ``F2^(1/2) = R^(1/2) B^H``.
    """
    if variant not in GAMMA2_VARIANTS:
        raise InvalidConfigError(f"unknown gamma2 variant {variant!r}")
    plan = ctx.plan
    if plan.group_of[k] != plan.group_of[l]:
        raise InvalidConfigError(f"UEs {k} and {l} do not share a pilot")
    N = ctx.N
    F1, F2, B = _f_matrices(ctx, m, k, l)
    Rl = ctx.stats.R[m, l]
    Rb = blocks(Rl, N)
    Rii = Rb[np.arange(N), np.arange(N)]  # (N, L, L)
    F1b = blocks(F1, N)
    # first[i, n, n'] = tr(R^{ii} F1^{n' n})
    first = np.einsum("iab,pnba->inp", Rii, F1b)
    if variant == "exact":
        F2b = blocks(F2, N)
        sq = np.einsum("iab,pnba->inp", Rii, F2b)
        t = np.trace(blocks(B @ Rl, N), axis1=-2, axis2=-1)  # t[n, i]
        cross = np.einsum("ni,pi->inp", np.conj(t), t)
        second = sq + cross
    else:
        Ft = blocks(hermitian_sqrt(F2), N)  # Ft[q, n] = F~^{qn}
        Rt = blocks(hermitian_sqrt(Rl), N)
        RR = np.einsum("iqab,qibc->iac", Rt, Rt)  # sum_q2 R~^{i q2} R~^{q2 i}
        # sum_q1 tr(F~^{q1 n} RR_i F~^{n' q1})
        sq = np.einsum("qnab,ibc,pqca->inp", Ft, RR, Ft)
        # u[i, n] = sum_q1 tr(F~^{q1 n} R~^{i q1}); w[i, n'] = sum_q2 tr(F~^{n' q2} R~^{q2 i})
        u = np.einsum("qnab,iqba->in", Ft, Rt)
        w = np.einsum("pqab,qiba->ip", Ft, Rt)
        second = sq + u[:, :, None] * w[:, None, :]
    pk, pl, tau = plan.pilot_power[k], plan.pilot_power[l], plan.tau_p
    per_i = pk * first + pk * pl * tau ** 2 * second
    return np.einsum("i,inp->np", ctx.eta_u[l], per_i)


@dataclass(frozen=True)
class ClosedFormTerms:
    Z: np.ndarray        # (M, K, N, N)
    Gamma1: np.ndarray   # (M, K, K, N, N)
    Gamma2: dict         # (k, l) co-pilot -> (M, N, N)
    Lambda: dict         # (k, l) co-pilot -> (M, N, N), Lambda_mkl
    group_of: np.ndarray
    eta_u: np.ndarray

    @property
    def M(self):
        return self.Z.shape[0]

    @property
    def K(self):
        return self.Z.shape[1]

    @property
    def N(self):
        return self.Z.shape[-1]


def compute_terms(ctx, variant="exact"):
    """All closed-form ingredients for one drop."""
    M, K = ctx.M, ctx.K
    Z = z_matrix(ctx.state.Rhat, ctx.N)
    G1 = gamma1_all(ctx)
    G2, Lam = {}, {}
    for k in range(K):
        for l in ctx.plan.copilots(k):
            l = int(l)
            G2[(k, l)] = np.stack([gamma2(ctx, m, k, l, variant) for m in range(M)])
            Lam[(k, l)] = np.stack([lambda_matrix(ctx, m, k, l) for m in range(M)])
    return ClosedFormTerms(Z, G1, G2, Lam, ctx.plan.group_of.copy(), ctx.eta_u.copy())


def assemble_T(terms, k, l, level="L3"):
    """``(T1, T2)`` for the pair ``(k, l)``; ``T2`` is zero unless ``l`` shares ``k``'s pilot."""
    M, N = terms.M, terms.N
    G1 = terms.Gamma1[:, k, l]
    copilot = terms.group_of[k] == terms.group_of[l]
    if copilot and (k, l) not in terms.Gamma2:
        raise InvalidConfigError(f"missing co-pilot terms for ({k}, {l})")
    P = np.diag(terms.eta_u[l])
    if level == "L3":
        T1 = np.zeros((M * N, M * N), dtype=complex)
        T2 = np.zeros_like(T1)
        for m in range(M):
            T1[m * N:(m + 1) * N, m * N:(m + 1) * N] = G1[m]
        if copilot:
            G2 = terms.Gamma2[(k, l)]
            Lkl = terms.Lambda[(k, l)]
            Llk = np.conj(np.swapaxes(Lkl, -1, -2))  # Lambda_mlk = E{H_ml^H Hhat_mk}
            for m in range(M):
                for mp in range(M):
                    blk = G2[m] - G1[m] if m == mp else Lkl[m] @ P @ Llk[mp]
                    T2[m * N:(m + 1) * N, mp * N:(mp + 1) * N] = blk
        return T1, T2
    if level == "L2":
        T1 = G1.sum(axis=0)
        T2 = np.zeros((N, N), dtype=complex)
        if copilot:
            G2 = terms.Gamma2[(k, l)]
            Lkl = terms.Lambda[(k, l)]
            Llk = np.conj(np.swapaxes(Lkl, -1, -2))
            T2 = (G2 - G1).sum(axis=0)
            s_kl, s_lk = Lkl.sum(axis=0), Llk.sum(axis=0)
            diag = sum(Lkl[m] @ P @ Llk[m] for m in range(M))
            T2 = T2 + s_kl @ P @ s_lk - diag
        return T1, T2
    raise InvalidConfigError(f"unknown level {level!r}")


def closed_moments(terms, trials=0):
    """Closed-form counterpart of :class:`cellfree.lsfd.GMoments`."""
    M, K, N = terms.M, terms.K, terms.N
    MN = M * N
    Egkk = terms.Z.transpose(1, 0, 2, 3).reshape(K, MN, N)
    Egg = np.zeros((K, K, MN, MN), dtype=complex)
    for k in range(K):
        for l in range(K):
            T1, T2 = assemble_T(terms, k, l, "L3")
            Egg[k, l] = T1 + T2
    Sk = np.zeros((K, MN, MN), dtype=complex)
    for m in range(M):
        Sk[:, m * N:(m + 1) * N, m * N:(m + 1) * N] = terms.Z[m]
    return lsfd.GMoments(Egkk=Egkk, Egg=symmetrize(Egg), Sk=symmetrize(Sk), trials=trials, M=M, N=N)


def se_level3_closed(ctx, terms=None, lsfd_mode="optimal"):
    """Per-UE Level 3 SE (prelog applied) with MR combining, from closed-form moments."""
    terms = compute_terms(ctx) if terms is None else terms
    mom = closed_moments(terms)
    if lsfd_mode == "optimal":
        A = lsfd.optimal_lsfd(mom, ctx.powers, ctx.eta_u, ctx.sigma2)
    elif lsfd_mode == "uniform":
        A = lsfd.uniform_lsfd(ctx.M, ctx.N, ctx.K)
    else:
        raise InvalidConfigError(f"unknown LSFD mode {lsfd_mode!r}")
    return ctx.prelog * lsfd.se_from_moments(mom, A, ctx.powers, ctx.eta_u, ctx.sigma2)


def se_level2_closed(ctx, terms=None):
    """Per-UE Level 2 SE from the summed closed-form terms (no stacking)."""
    from .se_engine import logdet_sinr

    terms = compute_terms(ctx) if terms is None else terms
    K = terms.K
    p = ctx.powers
    sq = np.sqrt(p[:, None] * ctx.eta_u)
    out = np.empty(K)
    for k in range(K):
        Zsum = terms.Z[:, k].sum(axis=0)
        D = Zsum * sq[k][None, :]
        total = sum(p[l] * sum(assemble_T(terms, k, l, "L2")) for l in range(K))
        Sigma = symmetrize(total - D @ herm(D) + ctx.sigma2 * Zsum)
        out[k] = logdet_sinr(D, Sigma)
    return ctx.prelog * out


def theta_lambda(ctx, m, k, l):
    """``(Theta_mkl, Lambda_mkl)`` for a co-pilot pair; ``l == k`` gives ``(Rhat_mk, Z_mk)``."""
    th = theta(ctx, m, k, l)
    return th, z_matrix(th, ctx.N)
