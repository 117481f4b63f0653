"""Pilot assignment and per-link MMSE channel estimation.

Pilot matrices are never built. Because they are orthogonal with
``Phi^H Phi = tau_p I``, projecting the received pilot block onto a pilot
matrix yields co-pilot channels plus white noise of variance
``tau_p * sigma2``, which is synthesized directly. All UEs sharing a pilot see
the same projected signal at a given AP.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError
from .linalg import blocks, herm, hpd_solve, symmetrize, unvec, vec

POLICIES = ("round_robin", "random")


@dataclass(frozen=True)
class PilotPlan:
    tau_p: int
    group_of: np.ndarray     # (K,) pilot group index per UE
    pilot_power: np.ndarray  # (K,) watts
    omega: np.ndarray        # (K, N) diagonal of the pilot power-allocation matrix

    @property
    def k_count(self):
        return self.group_of.shape[0]

    @property
    def n_antennas(self):
        return self.omega.shape[1]

    @property
    def group_count(self):
        return self.tau_p // self.n_antennas

    @property
    def groups(self):
        return [np.flatnonzero(self.group_of == g) for g in range(self.group_count)]

    def copilots(self, k):
        """Indices of the UEs sharing UE ``k``'s pilot, ``k`` included."""
        return np.flatnonzero(self.group_of == self.group_of[k])

    def omega_tilde_sqrt(self, L):
        """Diagonal of ``(Omega_k kron I_L)^(1/2)`` for every UE, shape ``(K, L*N)``."""
        return np.repeat(np.sqrt(self.omega), L, axis=1)


def assign_pilots(k_count, n_antennas, tau_p, policy="round_robin", rng=None,
                  pilot_power=0.2, omega=None, tau_c=None):
    """Partition UEs into ``tau_p / N`` pilot groups.

    ``round_robin`` puts UE ``k`` in group ``k mod G``; ``random`` applies the
    same rule after a random permutation of the UEs. ``omega`` defaults to an
    equal split ``1/N`` per antenna.
    """
    if k_count < 1 or n_antennas < 1:
        raise InvalidConfigError("need K >= 1 and N >= 1")
    if tau_p < n_antennas or tau_p % n_antennas:
        raise InvalidConfigError(f"tau_p={tau_p} must be a positive multiple of N={n_antennas}")
    if tau_c is not None and tau_p > tau_c:
        raise InvalidConfigError(f"tau_p={tau_p} exceeds tau_c={tau_c}")
    if policy not in POLICIES:
        raise InvalidConfigError(f"unknown pilot policy {policy!r}")
    G = tau_p // n_antennas
    order = np.arange(k_count)
    if policy == "random":
        if rng is None:
            raise InvalidConfigError("random pilot policy needs an rng")
        order = rng.permutation(k_count)
    group_of = np.empty(k_count, dtype=int)
    group_of[order] = np.arange(k_count) % G
    power = np.broadcast_to(np.asarray(pilot_power, dtype=float), (k_count,)).copy()
    if omega is None:
        omega = np.full((k_count, n_antennas), 1.0 / n_antennas)
    omega = np.broadcast_to(np.asarray(omega, dtype=float), (k_count, n_antennas)).copy()
    if np.any(omega < 0) or np.any(omega.sum(axis=1) > 1.0 + 1e-12):
        raise InvalidConfigError("pilot power allocation must satisfy 0 <= sum <= 1")
    if np.any(power < 0):
        raise InvalidConfigError("pilot power must be nonnegative")
    return PilotPlan(int(tau_p), group_of, power, omega)


@dataclass(frozen=True)
class EstimatorState:
    Psi: np.ndarray   # (M, K, LN, LN)
    Rhat: np.ndarray  # (M, K, LN, LN)
    C: np.ndarray     # (M, K, LN, LN)
    S: np.ndarray     # (M, K, LN, LN) = Omega~_k^(1/2) R_mk Psi_mk^-1
    N: int

    @property
    def Rhat_blocks(self):
        return blocks(self.Rhat, self.N)

    @property
    def C_blocks(self):
        return blocks(self.C, self.N)


@dataclass(frozen=True)
class EstimateRealization:
    Hhat: np.ndarray    # (..., M, K, L, N)
    Htilde: np.ndarray  # (..., M, K, L, N) or None when H was not supplied


def _scaled_correlations(stats, plan):
    """``p_l tau_p Om_l^(1/2) R_ml Om_l^(1/2)`` for every link, shape ``(M, K, LN, LN)``."""
    d = plan.omega_tilde_sqrt(stats.L)  # (K, LN)
    return (plan.pilot_power * plan.tau_p)[:, None, None] * d[:, :, None] * stats.R * d[:, None, :]


def estimator_state(stats, plan, sigma2):
    """MMSE estimator matrices for every (AP, UE) link."""
    M, K = stats.W.shape[:2]
    if plan.k_count != K:
        raise InvalidConfigError("pilot plan and statistics disagree on K")
    L, N = stats.L, stats.N
    LN = L * N
    contrib = _scaled_correlations(stats, plan)
    Psi = np.empty((M, K, LN, LN), dtype=complex)
    eye = np.eye(LN)
    for g in plan.groups:
        if g.size:
            Psi[:, g] = (contrib[:, g].sum(axis=1) + sigma2 * eye)[:, None]
    d = plan.omega_tilde_sqrt(L)[None, :, :, None]  # acts on rows
    # S = Om^(1/2) R Psi^-1 = (Psi^-1 R Om^(1/2))^H since Psi and R are Hermitian
    S = herm(hpd_solve(Psi, herm(d * stats.R)))
    Rhat = (plan.pilot_power * plan.tau_p)[None, :, None, None] * (S @ stats.R) * np.swapaxes(d, -1, -2)
    Rhat = symmetrize(Rhat)
    C = symmetrize(stats.R - Rhat)
    return EstimatorState(Psi=Psi, Rhat=Rhat, C=C, S=S, N=N)


def projected_pilot_signals(H, plan, sigma2, rng):
    """Projected pilot observations ``y_mg`` for every AP and pilot group.

    ``H`` has shape ``(..., M, K, L, N)``; the result has shape
    ``(..., M, G, L*N)``. Row ``g`` is shared by every UE in group ``g``.
    """
    L = H.shape[-2]
    d = plan.omega_tilde_sqrt(L)
    h = vec(H) * (np.sqrt(plan.pilot_power) * plan.tau_p)[:, None] * d  # (..., M, K, LN)
    G = plan.group_count
    y = np.zeros(h.shape[:-2] + (G, h.shape[-1]), dtype=complex)
    for g, members in enumerate(plan.groups):
        if members.size:
            y[..., g, :] = h[..., members, :].sum(axis=-2)
    scale = np.sqrt(plan.tau_p * sigma2 / 2.0)
    y += scale * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return y


def projected_pilot_signal(H, plan, k, sigma2, rng):
    """Projected pilot observation relevant to UE ``k``, shape ``(..., M, L*N)``."""
    return projected_pilot_signals(H, plan, sigma2, rng)[..., plan.group_of[k], :]


def estimate_channels(state, y, plan, H=None):
    """Apply ``hhat_mk = sqrt(p_k) S_mk y_mk`` to a batch of pilot observations."""
    N = state.N
    LN = state.S.shape[-1]
    L = LN // N
    y_k = y[..., plan.group_of, :]  # (..., M, K, LN)
    hhat = np.sqrt(plan.pilot_power)[:, None] * np.einsum("mkab,...mkb->...mka", state.S, y_k)
    Hhat = unvec(hhat, L, N)
    return EstimateRealization(Hhat=Hhat, Htilde=None if H is None else H - Hhat)
