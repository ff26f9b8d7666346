"""Block MMSE equalization over time-varying (CE-BEM) channels.

With Q zero guard vectors at each block edge, the truncated composite
channel is a standard block-banded matrix whose in-band blocks are
diagonalized by the per-vector transforms F_M Lambda_M^n. Interleaving
tone-major then turns the whole system into a banded matrix of V x U
blocks with block semi-bandwidth Q, so the normal matrix has U x U blocks
and semi-bandwidth 2Q and can be solved by a banded block LDL^H in time
linear in the payload length.

Block ordering of the interleaved system: block ``j = m * N_payload + p``
collects tone m of payload vector p (global vector p + Q).
"""

from dataclasses import dataclass

import numpy as np

from . import flops
from ._validation import check_sigma2, check_streams
from .channel import BemCirSet, composite_channel_dense
from .equalizer_ti import inverse_transform_vectors, transform_vectors
from .exceptions import ConfigurationError, DimensionError
from .linalg import (
    HermitianBlockBandedMatrix,
    block_ldlh_factor,
    block_ldlh_solve,
    dense_mmse_solve,
)

__all__ = [
    "BandedTvSystem",
    "build_tv_banded_channel",
    "banded_normal_matrix",
    "transform_truncated",
    "equalize_tv_fast",
    "truncated_channel_dense",
    "equalize_tv_direct",
]


@dataclass(frozen=True)
class BandedTvSystem:
    """Interleaved transformed-domain TV channel.

    ``blocks[q + Q, j]`` is the V x U block at block row ``j + q`` and block
    column ``j``; slots whose row falls outside the payload vector group of
    column ``j`` are zero.
    """

    blocks: np.ndarray
    M: int
    N: int
    guard: int

    @property
    def Q(self):
        return (self.blocks.shape[0] - 1) // 2

    @property
    def V(self):
        return self.blocks.shape[2]

    @property
    def U(self):
        return self.blocks.shape[3]

    @property
    def N_payload(self):
        return self.N - 2 * self.guard

    @property
    def K(self):
        return self.M * self.N

    @property
    def num_blocks(self):
        return self.blocks.shape[1]

    def to_dense(self):
        """Dense (K_payload*V, K_payload*U) matrix; test-oracle scale only."""
        nb, V, U = self.num_blocks, self.V, self.U
        out = np.zeros((nb, V, nb, U), dtype=np.complex128)
        j = np.arange(nb)
        for qi in range(2 * self.Q + 1):
            i = j + qi - self.Q
            ok = (i >= 0) & (i < nb)
            out[i[ok], :, j[ok], :] += self.blocks[qi, j[ok]]
        return out.reshape(nb * V, nb * U)


def build_tv_banded_channel(bem, cfg):
    """Assemble the interleaved banded channel straight from the BEM frequency table.

    Column block ``j = (m, p)`` holds, at offset q, the V x U matrix of
    H^{(v,u)}_{q, mN + p + Q_guard}; rows outside the payload are masked.
    """
    if not isinstance(bem, BemCirSet):
        raise TypeError("bem must be a BemCirSet")
    if 2 * cfg.Q >= cfg.N:
        raise ConfigurationError(f"need 2Q < N, got Q={cfg.Q}, N={cfg.N}")
    if bem.Q > cfg.Q:
        raise ConfigurationError(
            f"BEM Doppler spread {bem.Q} exceeds the {cfg.Q} guard vectors per edge"
        )
    if (bem.V, bem.U) != (cfg.V, cfg.U):
        raise DimensionError(f"BEM is {bem.V}x{bem.U}, config is {cfg.V}x{cfg.U}")
    M, N, Qg, Qb = cfg.M, cfg.N, cfg.Q, bem.Q
    Np = N - 2 * Qg
    hq = bem.freq_response(cfg.K).reshape(bem.V, bem.U, 2 * Qb + 1, M, N)
    hq = hq[..., Qg : N - Qg]  # (V, U, 2Qb+1, M, Np)
    blocks = np.moveaxis(hq, (0, 1), (-2, -1)).reshape(2 * Qb + 1, M * Np, bem.V, bem.U)
    q = np.arange(-Qb, Qb + 1)[:, None]
    p = np.tile(np.arange(Np), M)[None, :]
    valid = (p + q >= 0) & (p + q < Np)
    blocks = blocks * valid[..., None, None]
    return BandedTvSystem(blocks, M, N, Qg)


def banded_normal_matrix(g, sigma2):
    """R = G^H G + sigma2 I for a banded system, keeping only the 2Q block band.

    Block (j + d, j) of R is sum_q G_{j+d+q, j+d}^H G_{j+d+q, j}; with the
    column-offset storage that is blocks[q, j+d]^H blocks[q+d, j].
    """
    sigma2 = check_sigma2(sigma2)
    Q, nb, V, U = g.Q, g.num_blocks, g.V, g.U
    w = 2 * Q
    bands = np.zeros((w + 1, nb, U, U), dtype=np.complex128)
    count = 0
    for d in range(min(w, nb - 1) + 1):
        for q1 in range(-Q, Q - d + 1):
            a = g.blocks[q1 + Q, d:]
            b = g.blocks[q1 + d + Q, : nb - d]
            bands[d, : nb - d] += np.einsum("jvu,jvw->juw", a.conj(), b)
            count += (nb - d) * U * V * U
    bands[0] += sigma2 * np.eye(U)
    flops.add(count, "banded_normal")
    return HermitianBlockBandedMatrix(bands)


def _banded_matched_filter(g, y):
    """G^H y for y in block form (num_blocks, V)."""
    Q, nb = g.Q, g.num_blocks
    out = np.zeros((nb, g.U), dtype=np.complex128)
    for qi in range(2 * Q + 1):
        q = qi - Q
        lo, hi = max(0, -q), min(nb, nb - q)
        out[lo:hi] += np.einsum("jvu,jv->ju", g.blocks[qi, lo:hi].conj(), y[lo + q : hi + q])
    flops.add(nb * (2 * Q + 1) * g.U * g.V, "banded_matched_filter")
    return out


def transform_truncated(x, M, N, guard):
    """y = Pi_{V,K_payload} Phi_V x for truncated observations ``x`` (V, K_payload).

    Returns the (num_blocks, V) interleaved observation.
    """
    t = transform_vectors(x, M, M * N, first=guard)  # (V, Np, M)
    return np.transpose(t, (2, 1, 0)).reshape(-1, x.shape[0])


def _untransform(a, M, N, guard, U):
    Np = N - 2 * guard
    a = np.transpose(a.reshape(M, Np, U), (2, 1, 0))  # (U, Np, M)
    return inverse_transform_vectors(a, M, M * N, first=guard)


def equalize_tv_fast(banded, x, sigma2):
    """Low-complexity block MMSE over a CE-BEM channel.

    Parameters
    ----------
    banded : BandedTvSystem
        Output of :func:`build_tv_banded_channel`.
    x : ndarray, shape (V, K_payload)
        Truncated demodulated observations.
    sigma2 : float
        Noise variance; must be positive so the normal matrix is PD.

    Returns
    -------
    ndarray, shape (U, K_payload)
    """
    sigma2 = check_sigma2(sigma2, strict=True)
    g = banded
    x = check_streams(x, g.V, g.M * g.N_payload)
    y = transform_truncated(x, g.M, g.N, g.guard)
    r = banded_normal_matrix(g, sigma2)
    rhs = _banded_matched_filter(g, y)
    a = block_ldlh_solve(block_ldlh_factor(r), rhs.reshape(-1))
    return _untransform(a, g.M, g.N, g.guard, g.U)


def truncated_channel_dense(channel, cfg):
    """Stacked truncated composite matrix, shape (V*K_payload, U*K_payload).

    Block (v, u) is T C^{(v,u)} T^H with T selecting the payload vectors.
    ``channel`` may be a CirSet, a BemCirSet (exact-BEM system) or a
    TvCirTrace (the true time-varying channel).
    """
    c = composite_channel_dense(channel, cfg.M, cfg.K)
    sl = slice(cfg.Q * cfg.M, (cfg.N - cfg.Q) * cfg.M)
    c = c[:, :, sl, sl]
    V, U, kp, _ = c.shape
    return c.transpose(0, 2, 1, 3).reshape(V * kp, U * kp)


def equalize_tv_direct(c_trunc, x, sigma2):
    """(C^H C + sigma2 I)^{-1} C^H x with the dense truncated matrix.

    ``x`` is (V, K_payload); returns (U, K_payload).
    """
    x = np.asarray(x, dtype=np.complex128)
    V, kp = x.shape
    if c_trunc.shape[0] != V * kp or c_trunc.shape[1] % kp:
        raise DimensionError(
            f"matrix {c_trunc.shape} does not match observations of shape {x.shape}"
        )
    d = dense_mmse_solve(c_trunc, sigma2, x.reshape(-1))
    return d.reshape(-1, kp)
