"""Structured complex linear algebra.

DFT matrices, stride permutations, Kronecker-structured transforms,
block-diagonal and Hermitian block-banded containers, the dense MMSE
solve used as the cubic-cost reference, and a band-restricted block
LDL^H factorization whose cost is linear in the number of blocks.

Permutations and Kronecker products are applied by index remapping and
reshaping; dense matrices are only built by the ``to_dense`` helpers
used in tests.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import flops
from ._validation import as_complex_array, check_count, check_sigma2
from .exceptions import DimensionError, FactorizationError, SingularityError

__all__ = [
    "dft_matrix",
    "phase_ramp",
    "StridePermutation",
    "apply_stride_permutation",
    "kron_block_transform",
    "BlockDiagonalMatrix",
    "HermitianBlockBandedMatrix",
    "BlockLDLFactors",
    "dense_mmse_solve",
    "block_ldlh_factor",
    "block_ldlh_solve",
]


def dft_matrix(n):
    """Unitary DFT matrix with entry (k, l) = exp(-j 2 pi k l / n) / sqrt(n)."""
    try:
        n = check_count(n, "n")
    except ValueError as exc:
        raise DimensionError(str(exc)) from None
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def phase_ramp(length, step, total, sign=-1):
    """Diagonal of a unit-modulus phase ramp, ``exp(sign * j 2 pi step i / total)``.

    ``phase_ramp(M, n, K)`` is the diagonal of Lambda_M^n; with ``sign=+1``
    and ``length=K`` it gives the Doppler ramp exp(j 2 pi q k / K).
    ``step`` may be an array, in which case ramps are stacked along the
    leading axes.
    """
    i = np.arange(length)
    step = np.asarray(step, dtype=float)
    return np.exp(sign * 2j * np.pi * np.multiply.outer(step, i) / total)


@dataclass(frozen=True)
class StridePermutation:
    """The mn x mn stride permutation P_{m,n}.

    Row block ``k`` of the matrix is ``I_m kron e_n(k)^T`` so that
    ``y[k*m + i] = x[i*n + k]``. Equivalently, ``x`` viewed as an (m, n)
    array is transposed.
    """

    m: int
    n: int

    def __post_init__(self):
        check_count(self.m, "m")
        check_count(self.n, "n")

    @property
    def size(self):
        return self.m * self.n

    @property
    def inverse(self):
        return StridePermutation(self.n, self.m)

    def indices(self):
        """Source index for each output position: ``y = x[self.indices()]``."""
        return np.arange(self.size).reshape(self.m, self.n).T.reshape(-1)

    def apply(self, x, axis=0):
        x = np.asarray(x)
        if x.shape[axis] != self.size:
            raise DimensionError(
                f"P_{{{self.m},{self.n}}} needs length {self.size} on axis {axis}, "
                f"got {x.shape[axis]}"
            )
        x = np.moveaxis(x, axis, 0)
        rest = x.shape[1:]
        y = x.reshape((self.m, self.n) + rest).swapaxes(0, 1).reshape((self.size,) + rest)
        return np.moveaxis(y, 0, axis)

    def apply_inverse(self, x, axis=0):
        return self.inverse.apply(x, axis=axis)

    def to_dense(self):
        """Dense 0/1 matrix; for test oracles only."""
        p = np.zeros((self.size, self.size))
        p[np.arange(self.size), self.indices()] = 1.0
        return p


def apply_stride_permutation(p, x):
    """Apply P_{m,n} to a vector (or to the rows of a matrix)."""
    return p.apply(x, axis=0)


def kron_block_transform(i, core, x):
    """Apply ``(I_i kron core) @ x`` segment by segment."""
    core = as_complex_array(core, "core", ndim=2)
    m = core.shape[0]
    if core.shape[1] != m:
        raise DimensionError(f"core must be square, got {core.shape}")
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[0] != i * m:
        raise DimensionError(f"x must have length {i * m}, got {x.shape[0]}")
    seg = x.reshape((i, m) + x.shape[1:])
    return np.einsum("ab,ib...->ia...", core, seg).reshape(x.shape)


@dataclass(frozen=True)
class BlockDiagonalMatrix:
    """Block-diagonal matrix stored as a stack of equally sized blocks.

    ``blocks`` has shape (num_blocks, block_rows, block_cols); everything off
    the block diagonal is zero by construction.
    """

    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=np.complex128)
        if b.ndim != 3:
            raise DimensionError(f"blocks must be 3-D, got shape {b.shape}")
        object.__setattr__(self, "blocks", b)

    @property
    def num_blocks(self):
        return self.blocks.shape[0]

    @property
    def block_rows(self):
        return self.blocks.shape[1]

    @property
    def block_cols(self):
        return self.blocks.shape[2]

    @property
    def shape(self):
        return (self.num_blocks * self.block_rows, self.num_blocks * self.block_cols)

    def matvec(self, x):
        x = np.asarray(x, dtype=np.complex128)
        if x.shape[0] != self.shape[1]:
            raise DimensionError(f"x must have length {self.shape[1]}, got {x.shape[0]}")
        seg = x.reshape((self.num_blocks, self.block_cols) + x.shape[1:])
        return np.einsum("kab,kb...->ka...", self.blocks, seg).reshape(
            (self.shape[0],) + x.shape[1:]
        )

    def to_dense(self):
        return scipy.linalg.block_diag(*self.blocks)


class HermitianBlockBandedMatrix:
    """Hermitian matrix of square blocks with block semi-bandwidth ``bsb``.

    Only the lower band is stored: ``bands[d, j]`` is block (j + d, j) for
    ``d = 0..bsb``. The upper band follows from block (i, j) = block (j, i)^H
    and blocks further than ``bsb`` from the diagonal are zero. Slots with
    ``j + d >= num_blocks`` are padding and hold zeros.
    """

    def __init__(self, bands):
        bands = np.array(bands, dtype=np.complex128)
        if bands.ndim != 4 or bands.shape[2] != bands.shape[3]:
            raise DimensionError(
                f"bands must have shape (bsb+1, num_blocks, b, b), got {bands.shape}"
            )
        nb = bands.shape[1]
        for d in range(1, bands.shape[0]):
            bands[d, max(nb - d, 0):] = 0.0
        # the diagonal blocks must themselves be Hermitian
        bands[0] = 0.5 * (bands[0] + bands[0].conj().swapaxes(-1, -2))
        self.bands = bands
        self.bands.setflags(write=False)

    @property
    def bsb(self):
        return self.bands.shape[0] - 1

    @property
    def num_blocks(self):
        return self.bands.shape[1]

    @property
    def block_size(self):
        return self.bands.shape[2]

    @property
    def size(self):
        return self.num_blocks * self.block_size

    def block(self, i, j):
        d = i - j
        if abs(d) > self.bsb:
            return np.zeros((self.block_size,) * 2, dtype=np.complex128)
        if d >= 0:
            return self.bands[d, j]
        return self.bands[-d, i].conj().T

    @classmethod
    def from_dense(cls, a, block_size, bsb):
        """Take the band of a dense Hermitian matrix (content outside it is dropped)."""
        a = as_complex_array(a, "a", ndim=2)
        b = block_size
        if a.shape[0] != a.shape[1] or a.shape[0] % b:
            raise DimensionError(f"cannot block {a.shape} into {b}x{b} blocks")
        nb = a.shape[0] // b
        blocks = a.reshape(nb, b, nb, b).swapaxes(1, 2)
        bands = np.zeros((bsb + 1, nb, b, b), dtype=np.complex128)
        for d in range(min(bsb, nb - 1) + 1):
            j = np.arange(nb - d)
            bands[d, j] = blocks[j + d, j]
        return cls(bands)

    def to_dense(self):
        nb, b = self.num_blocks, self.block_size
        out = np.zeros((nb, b, nb, b), dtype=np.complex128)
        for d in range(min(self.bsb, nb - 1) + 1):
            j = np.arange(nb - d)
            out[j + d, :, j, :] = self.bands[d, j]
            if d:
                out[j, :, j + d, :] = self.bands[d, j].conj().swapaxes(-1, -2)
        return out.reshape(nb * b, nb * b)

    def matvec(self, x):
        x = np.asarray(x, dtype=np.complex128)
        if x.shape[0] != self.size:
            raise DimensionError(f"x must have length {self.size}, got {x.shape[0]}")
        nb, b = self.num_blocks, self.block_size
        xs = x.reshape((nb, b) + x.shape[1:])
        y = np.einsum("jab,jb...->ja...", self.bands[0], xs)
        for d in range(1, min(self.bsb, nb - 1) + 1):
            lower = self.bands[d, : nb - d]
            y[d:] += np.einsum("jab,jb...->ja...", lower, xs[: nb - d])
            y[: nb - d] += np.einsum("jba,jb...->ja...", lower.conj(), xs[d:])
        return y.reshape(x.shape)


@dataclass(frozen=True)
class BlockLDLFactors:
    """Factors of R = L D L^H for a Hermitian block-banded R.

    ``lower[d, j]`` holds L block (j + d, j) for ``d = 1..bsb`` (``lower[0]``
    is the implicit identity and is left as zeros); ``diag[j]`` is the pivot
    block D_j and ``diag_inv[j]`` its inverse.
    """

    lower: np.ndarray
    diag: np.ndarray
    diag_inv: np.ndarray

    @property
    def bsb(self):
        return self.lower.shape[0] - 1

    @property
    def num_blocks(self):
        return self.diag.shape[0]

    @property
    def block_size(self):
        return self.diag.shape[1]

    def l_dense(self):
        nb, b = self.num_blocks, self.block_size
        bands = np.array(self.lower)
        bands[0] = np.eye(b)
        out = np.zeros((nb, b, nb, b), dtype=np.complex128)
        for d in range(min(self.bsb, nb - 1) + 1):
            j = np.arange(nb - d)
            out[j + d, :, j, :] = bands[d, j]
        return out.reshape(nb * b, nb * b)

    def d_dense(self):
        return scipy.linalg.block_diag(*self.diag)


def dense_mmse_solve(h, sigma2, x):
    """Solve ``(H^H H + sigma2 I)^{-1} H^H x`` densely.

    This is the cubic-cost reference path. ``x`` may carry extra columns.

    Raises
    ------
    SingularityError
        If the normal matrix is singular (only possible when ``sigma2 == 0``).
    """
    h = as_complex_array(h, "h", ndim=2)
    sigma2 = check_sigma2(sigma2)
    x = np.asarray(x, dtype=np.complex128)
    rows, cols = h.shape
    if x.shape[0] != rows:
        raise DimensionError(f"x must have length {rows}, got {x.shape[0]}")
    nrhs = 1 if x.ndim == 1 else int(np.prod(x.shape[1:]))
    flops.add(flops.dense_mmse_flops(rows, cols, nrhs), "dense_mmse")

    r = h.conj().T @ h
    r[np.diag_indices(cols)] += sigma2
    rhs = h.conj().T @ x
    try:
        c, lower = scipy.linalg.cho_factor(r, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularityError("MMSE normal matrix is singular") from None
    piv = np.abs(np.diag(c)) ** 2
    if piv.min() <= 10 * cols * np.finfo(float).eps * piv.max():
        raise SingularityError("MMSE normal matrix is numerically singular")
    return scipy.linalg.cho_solve((c, lower), rhs, check_finite=False)


def _band_pairs(bsb):
    """Index grid over (row offset e, history offset t) with e + t <= bsb."""
    e, t = np.meshgrid(np.arange(bsb + 1), np.arange(1, bsb + 1), indexing="ij")
    mask = e + t <= bsb
    return e, t, np.where(mask, e + t, 0), mask


def block_ldlh_factor(r):
    """Band-restricted block LDL^H factorization of a Hermitian PD matrix.

    For each block column ``j`` the Schur-complement recurrence

        S_{j+e, j} = R_{j+e, j} - sum_{t >= 1} L_{j+e, j-t} D_{j-t} L_{j, j-t}^H

    gives the pivot ``D_j = S_{j, j}`` and ``L_{j+e, j} = S_{j+e, j} D_j^{-1}``.
    Only terms inside the band contribute, so no fill appears outside
    ``bsb`` and the cost is O(num_blocks * bsb^2 * block_size^3).

    Raises
    ------
    FactorizationError
        If a pivot block is not positive definite; ``block_index`` names it.
    """
    if not isinstance(r, HermitianBlockBandedMatrix):
        raise TypeError("r must be a HermitianBlockBandedMatrix")
    nb, b, w = r.num_blocks, r.block_size, r.bsb
    # pad with w zero block columns in front so j - t never goes negative
    lower = np.zeros((w + 1, nb + w, b, b), dtype=np.complex128)
    scaled = np.zeros_like(lower)  # L_{i,k} D_k
    diag = np.empty((nb, b, b), dtype=np.complex128)
    diag_inv = np.empty_like(diag)
    e_idx, t_idx, et_idx, mask = _band_pairs(w)
    e_col = np.arange(w + 1)
    count = 0

    for j in range(nb):
        jp = j + w
        s = r.bands[:, j].copy()
        if w:
            hist = jp - t_idx[0]  # padded column indices j - t
            wg = scaled[et_idx, hist[None, :]] * mask[..., None, None]
            lh = lower[t_idx[0], hist]
            s -= np.einsum("etab,tcb->eac", wg, lh.conj())
            n_terms = int(np.sum(mask & (j + e_idx < nb) & (j - t_idx >= 0)))
            count += n_terms * b**3
        d = 0.5 * (s[0] + s[0].conj().T)
        try:
            chol = np.linalg.cholesky(d)
        except np.linalg.LinAlgError:
            raise FactorizationError(j) from None
        piv = np.abs(np.diag(chol)) ** 2
        if piv.min() <= 10 * b * np.finfo(float).eps * max(piv.max(), 1e-300):
            raise FactorizationError(j)
        d_inv = scipy.linalg.cho_solve((chol, True), np.eye(b), check_finite=False)
        diag[j] = d
        diag_inv[j] = d_inv
        count += flops.chol_flops(b) + b**3
        n_sub = min(w, nb - 1 - j)
        if n_sub:
            e = e_col[1 : n_sub + 1]
            scaled[e, jp] = s[e]
            lower[e, jp] = s[e] @ d_inv
            count += n_sub * b**3

    flops.add(count, "block_ldlh_factor")
    return BlockLDLFactors(
        lower=np.ascontiguousarray(lower[:, w:]), diag=diag, diag_inv=diag_inv
    )


def block_ldlh_solve(factors, rhs):
    """Solve ``L D L^H x = rhs`` by forward, block-diagonal and backward substitution."""
    nb, b, w = factors.num_blocks, factors.block_size, factors.bsb
    rhs = np.asarray(rhs, dtype=np.complex128)
    if rhs.shape[0] != nb * b:
        raise DimensionError(f"rhs must have length {nb * b}, got {rhs.shape[0]}")
    tail = rhs.shape[1:]
    nrhs = int(np.prod(tail)) if tail else 1
    lower = factors.lower
    y = rhs.reshape((nb, b) + tail).copy()
    count = 0

    for i in range(1, nb):
        t = np.arange(1, min(w, i) + 1)
        if t.size:
            y[i] -= np.einsum("tab,tb...->a...", lower[t, i - t], y[i - t])
            count += t.size * b * b * nrhs
    y = np.einsum("jab,jb...->ja...", factors.diag_inv, y)
    count += nb * b * b * nrhs
    for i in range(nb - 2, -1, -1):
        t = np.arange(1, min(w, nb - 1 - i) + 1)
        if t.size:
            y[i] -= np.einsum("tba,tb...->a...", lower[t, i].conj(), y[i + t])
            count += t.size * b * b * nrhs

    flops.add(count, "block_ldlh_solve")
    return y.reshape(rhs.shape)
