"""Network drops, wrap-around distances, pathloss and correlated shadowing."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, NumericalError

HEIGHT_OFFSET_M = 11.0
EIG_CLAMP = 1e-12

# 3x3 replica offsets used for the torus minimum
_SHIFTS = np.array([(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)], dtype=float)


@dataclass(frozen=True)
class NetworkDrop:
    ap_positions: np.ndarray  # (M, 2) meters
    ue_positions: np.ndarray  # (K, 2) meters
    area_side: float
    ap_height_offset: float = HEIGHT_OFFSET_M

    @property
    def m_count(self):
        return self.ap_positions.shape[0]

    @property
    def k_count(self):
        return self.ue_positions.shape[0]

    def ap_ue_distances(self):
        return wrapped_distance(self.ap_positions[:, None, :], self.ue_positions[None, :, :],
                                self.area_side, self.ap_height_offset)


@dataclass(frozen=True)
class LargeScaleMap:
    beta: np.ndarray         # (M, K) linear
    shadow_db: np.ndarray    # (M, K)
    pathloss_db: np.ndarray  # (M, K)


def drop_network(m_count, k_count, area_side, rng_seed, height_offset=HEIGHT_OFFSET_M):
    """Uniform i.i.d. AP and UE positions in ``[0, area_side]^2``."""
    if m_count < 1 or k_count < 1:
        raise InvalidConfigError("need at least one AP and one UE")
    if not area_side > 0:
        raise InvalidConfigError("area_side must be positive")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    aps = rng.uniform(0.0, area_side, size=(m_count, 2))
    ues = rng.uniform(0.0, area_side, size=(k_count, 2))
    return NetworkDrop(aps, ues, float(area_side), float(height_offset))


def wrapped_distance(p, q, area_side, height_offset=0.0):
    """Distance on the torus of side ``area_side``, plus a vertical offset.

    ``p`` and ``q`` broadcast against each other with coordinates on the
    last axis. The horizontal part is the minimum over the 3x3 replica grid.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    diff = p - q
    shifted = diff[..., None, :] + area_side * _SHIFTS
    horiz2 = np.min(np.sum(shifted ** 2, axis=-1), axis=-1)
    return np.sqrt(horiz2 + height_offset ** 2)


def pathloss_db(d):
    """``-30.18 - 26 log10(d / 1 m)`` in dB."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise InvalidConfigError("distance must be positive")
    out = -30.18 - 26.0 * np.log10(d)
    return out if out.ndim else float(out)


def shadow_covariance(positions, area_side, sigma_sf_db, d_dc):
    """``sigma^2 * 2^(-d/d_dc)`` over pairwise wrapped horizontal distances."""
    d = wrapped_distance(positions[:, None, :], positions[None, :, :], area_side, 0.0)
    return sigma_sf_db ** 2 * np.power(2.0, -d / d_dc)


def correlated_normal(cov, rng, size=None):
    """Zero-mean Gaussian draws with covariance ``cov`` via a clamped eigen-factor.

    Returns shape ``(n,)`` or ``(size, n)``.
    """
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    w = np.where(w > EIG_CLAMP * max(np.max(np.abs(w)), 1.0), w, 0.0)
    factor = v * np.sqrt(w)
    if not np.all(np.isfinite(factor)):
        raise NumericalError("shadowing covariance factorization failed")
    shape = (cov.shape[0],) if size is None else (size, cov.shape[0])
    z = rng.standard_normal(shape)
    return z @ factor.T


def sample_shadowing(drop, delta_f=0.5, sigma_sf_db=8.0, d_dc=100.0, rng_seed=None, size=None):
    """Shadow fading ``F_mk = sqrt(delta_f) a_m + sqrt(1 - delta_f) b_k`` in dB.

    The AP process ``a`` and the UE process ``b`` are independent, each with
    covariance ``sigma_sf^2 * 2^(-d/d_dc)``. Returns ``(M, K)``, or
    ``(size, M, K)`` independent draws when ``size`` is given.
    """
    if not 0.0 <= delta_f <= 1.0:
        raise InvalidConfigError("delta_f must lie in [0, 1]")
    if not d_dc > 0:
        raise InvalidConfigError("d_dc must be positive")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    a = correlated_normal(shadow_covariance(drop.ap_positions, drop.area_side, sigma_sf_db, d_dc),
                          rng, size)
    b = correlated_normal(shadow_covariance(drop.ue_positions, drop.area_side, sigma_sf_db, d_dc),
                          rng, size)
    return np.sqrt(delta_f) * a[..., :, None] + np.sqrt(1.0 - delta_f) * b[..., None, :]


def large_scale_map(drop, shadow_db=None):
    pl = pathloss_db(drop.ap_ue_distances())
    pl = np.atleast_2d(pl)
    if shadow_db is None:
        shadow_db = np.zeros_like(pl)
    return LargeScaleMap(beta=10.0 ** ((pl + shadow_db) / 10.0), shadow_db=shadow_db, pathloss_db=pl)
