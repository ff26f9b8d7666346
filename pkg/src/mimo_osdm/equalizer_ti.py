"""Per-vector MMSE equalization over time-invariant channels.

Over a TI channel the composite matrix is block diagonal, so every
symbol vector n can be equalized on its own. The direct route builds the
VM x UM matrix H_n and solves densely (O(U^3 M^3)). The fast route
transforms each received vector with F_M Lambda_M^n, interleaves so that
the channel becomes M independent V x U blocks (one per tone n + mN),
solves those, and undoes the interleaving and transform (O(U^3 M)).
"""

import numpy as np

from . import flops
from ._validation import check_count, check_sigma2, check_streams
from .exceptions import DimensionError, SingularityError
from .linalg import BlockDiagonalMatrix, dense_mmse_solve, dft_matrix, phase_ramp

__all__ = [
    "build_pervector_channel",
    "interleaved_channel",
    "equalize_ti_direct",
    "equalize_ti_fast",
    "small_mmse_solve",
    "transform_vectors",
    "inverse_transform_vectors",
]


def _check_freq(freq, M):
    freq = np.asarray(freq, dtype=np.complex128)
    if freq.ndim != 3:
        raise DimensionError(f"frequency table must be (V, U, K), got {freq.shape}")
    K = freq.shape[-1]
    if K % M:
        raise DimensionError(f"K={K} is not a multiple of M={M}")
    return freq, K // M


def build_pervector_channel(freq, M, n):
    """Dense stacked matrix H_n of shape (V*M, U*M).

    Block (v, u) is Lambda_M^{nH} F_M^H diag(H_n, H_{n+N}, ..., H_{n+(M-1)N}) F_M Lambda_M^n.
    """
    M = check_count(M, "M")
    freq, N = _check_freq(freq, M)
    if not 0 <= n < N:
        raise IndexError(f"vector index {n} outside [0, {N})")
    V, U, K = freq.shape
    f = dft_matrix(M)
    t = f * phase_ramp(M, n, K)[None, :]  # F_M Lambda_M^n
    hbar = freq[:, :, n::N]  # (V, U, M)
    blocks = np.einsum("am,vum,mb->vuab", t.conj().T, hbar, t)
    return blocks.transpose(0, 2, 1, 3).reshape(V * M, U * M)


def interleaved_channel(freq, M, n):
    """The block-diagonal matrix G_n = P_{V,M} Hbar_n P_{U,M}^H.

    Block m is the V x U matrix with entry (v, u) = H^{(v,u)}_{n + mN}.
    """
    M = check_count(M, "M")
    freq, N = _check_freq(freq, M)
    return BlockDiagonalMatrix(np.moveaxis(freq[:, :, n::N], -1, 0))


def equalize_ti_direct(h_n, x_n, sigma2):
    """d_n = (H_n^H H_n + sigma2 I)^{-1} H_n^H x_n, solved densely."""
    return dense_mmse_solve(h_n, sigma2, x_n)


def small_mmse_solve(g, y, sigma2):
    """Batched MMSE for a stack of small systems.

    ``g`` has shape (..., V, U) and ``y`` shape (..., V); returns the (..., U)
    solutions of (G^H G + sigma2 I) a = G^H y.
    """
    sigma2 = check_sigma2(sigma2)
    V, U = g.shape[-2:]
    batch = int(np.prod(g.shape[:-2]))
    flops.add(batch * flops.dense_mmse_flops(V, U), "small_mmse")
    gh = np.conj(np.swapaxes(g, -1, -2))
    r = gh @ g
    r += sigma2 * np.eye(U)
    rhs = np.einsum("...uv,...v->...u", gh, y)
    try:
        chol = np.linalg.cholesky(r)
    except np.linalg.LinAlgError:
        raise SingularityError("per-tone MMSE normal matrix is singular") from None
    piv = np.abs(np.diagonal(chol, axis1=-2, axis2=-1)) ** 2
    if np.any(piv.min(axis=-1) <= 10 * U * np.finfo(float).eps * piv.max(axis=-1)):
        raise SingularityError("per-tone MMSE normal matrix is numerically singular")
    return np.linalg.solve(r, rhs[..., None])[..., 0]


def transform_vectors(x, M, K, first=0):
    """Apply F_M Lambda_M^n to every length-M vector of ``x`` (shape (..., n_vec*M)).

    Vector j of ``x`` is treated as global vector ``first + j`` of a block of
    length ``K``.
    """
    vec = x.reshape(x.shape[:-1] + (-1, M))
    n_idx = first + np.arange(vec.shape[-2])
    return np.fft.fft(vec * phase_ramp(M, n_idx, K), axis=-1, norm="ortho")


def inverse_transform_vectors(a, M, K, first=0):
    """Inverse of :func:`transform_vectors`; returns the flattened (..., n_vec*M) array."""
    n_idx = first + np.arange(a.shape[-2])
    vec = np.fft.ifft(a, axis=-1, norm="ortho") * phase_ramp(M, n_idx, K).conj()
    return vec.reshape(vec.shape[:-2] + (-1,))


def equalize_ti_fast(freq, M, x, sigma2):
    """Low-complexity MMSE for all N vectors at once.

    Parameters
    ----------
    freq : ndarray, shape (V, U, K)
        Per-link frequency responses H_k.
    M : int
        Vector length.
    x : ndarray, shape (V, K)
        Demodulated blocks of every receiver.
    sigma2 : float
        Noise variance.

    Returns
    -------
    ndarray, shape (U, K)
        Symbol estimates, identical (to rounding) to running
        :func:`equalize_ti_direct` on every vector.
    """
    M = check_count(M, "M")
    freq, N = _check_freq(freq, M)
    V, U, K = freq.shape
    x = check_streams(x, V, K)
    # steps 1-2: y[v, n, m] is receiver v on tone n + mN after F_M Lambda_M^n
    y = transform_vectors(x, M, K)
    y = np.moveaxis(y, 0, -1)  # (N, M, V)
    g = np.moveaxis(freq.reshape(V, U, M, N), (0, 1), (-2, -1))  # (M, N, V, U)
    g = np.swapaxes(g, 0, 1)  # (N, M, V, U)
    # step 3: M independent V x U problems per vector
    a = small_mmse_solve(g, y, sigma2)  # (N, M, U)
    # steps 4-5
    a = np.moveaxis(a, -1, 0)  # (U, N, M)
    return inverse_transform_vectors(a, M, K)
