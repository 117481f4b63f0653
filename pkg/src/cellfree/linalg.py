"""Small batched Hermitian linear-algebra helpers.

Every function accepts arrays with arbitrary leading batch dimensions and
operates on the trailing two axes.
"""

import numpy as np

from .errors import NumericalError

SQRT_CLAMP = 1e-12


def herm(a):
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def symmetrize(a):
    return 0.5 * (a + herm(a))


def hermitian_defect(a):
    """Relative Frobenius distance between ``a`` and its conjugate transpose."""
    num = np.linalg.norm(a - herm(a), axis=(-2, -1))
    den = np.linalg.norm(a, axis=(-2, -1))
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), num)


def check_hermitian(a, tol=1e-10):
    worst = float(np.max(hermitian_defect(a), initial=0.0))
    if worst > tol:
        raise NumericalError(f"matrix is not Hermitian (relative defect {worst:.3e})")


def vec(h):
    """Column-stacking vectorization of ``(..., L, N)`` into ``(..., L*N)``."""
    shape = h.shape
    return np.swapaxes(h, -1, -2).reshape(shape[:-2] + (shape[-1] * shape[-2],))


def unvec(v, L, N):
    """Inverse of :func:`vec`."""
    return np.swapaxes(v.reshape(v.shape[:-1] + (N, L)), -1, -2)


def blocks(r, N):
    """Split ``(..., L*N, L*N)`` into ``(..., N, N, L, L)`` with ``out[..., n, i] = R^{ni}``."""
    LN = r.shape[-1]
    if LN % N:
        raise ValueError(f"dimension {LN} is not a multiple of N={N}")
    L = LN // N
    out = r.reshape(r.shape[:-2] + (N, L, N, L))
    return np.swapaxes(out, -3, -2)


def unblocks(b):
    """Inverse of :func:`blocks`."""
    N, L = b.shape[-3], b.shape[-1]
    return np.swapaxes(b, -3, -2).reshape(b.shape[:-4] + (N * L, N * L))


def block_traces(r, N):
    """``out[..., n, i] = tr(R^{ni})``."""
    return np.trace(blocks(r, N), axis1=-2, axis2=-1)


def hermitian_sqrt(a, clamp=SQRT_CLAMP):
    """Principal PSD square root via eigendecomposition.

    Eigenvalues below ``clamp * ||A||_2`` (and all negative ones) are set to
    zero before taking the root.
    """
    w, v = np.linalg.eigh(symmetrize(a))
    top = np.max(np.abs(w), axis=-1, keepdims=True)
    w = np.where(w > clamp * top, w, 0.0)
    return (v * np.sqrt(w)[..., None, :]) @ herm(v)


def cholesky(a):
    try:
        return np.linalg.cholesky(symmetrize(a))
    except np.linalg.LinAlgError as exc:
        w = np.linalg.eigvalsh(symmetrize(a))
        raise NumericalError(
            f"matrix is not positive definite (min eigenvalue {w.min():.3e}, "
            f"max {w.max():.3e})"
        ) from exc


def hpd_solve(a, b):
    """Solve ``A X = B`` for Hermitian positive definite ``A`` via Cholesky."""
    c = cholesky(a)
    y = np.linalg.solve(c, b)
    return np.linalg.solve(herm(c), y)


def logdet_hpd(a):
    """Natural log-determinant of a Hermitian positive definite matrix."""
    c = cholesky(a)
    return 2.0 * np.sum(np.log(np.abs(np.diagonal(c, axis1=-2, axis2=-1))), axis=-1)


def block_diag(b):
    """Stack ``(..., M, n, n)`` into a block-diagonal ``(..., M*n, M*n)``."""
    M, n = b.shape[-3], b.shape[-1]
    out = np.zeros(b.shape[:-3] + (M * n, M * n), dtype=b.dtype)
    for m in range(M):
        out[..., m * n:(m + 1) * n, m * n:(m + 1) * n] = b[..., m, :, :]
    return out
