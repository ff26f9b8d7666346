"""OSDM modulation and the block bookkeeping around it.

A block of K = M*N symbols is viewed as N vectors of length M. The
modulator applies an N-point unitary IDFT across the vectors (one per
vector component), i.e. ``s = (F_N^H kron I_M) d``; the demodulator
undoes it. M = 1 is plain OFDM, M = K is single-carrier block
transmission.

All block functions operate on the last axis, so a (U, K) array holds
one block per transmitter.
"""

from dataclasses import asdict, dataclass

import numpy as np

from ._validation import as_complex_array, check_count, check_sigma2
from .exceptions import ConfigurationError, DimensionError

__all__ = [
    "MimoOsdmConfig",
    "osdm_modulate",
    "osdm_demodulate",
    "add_cp",
    "remove_cp",
    "partition_vectors",
    "stack_streams",
    "insert_guard_vectors",
    "truncate_guard",
    "papr_db",
]


@dataclass(frozen=True)
class MimoOsdmConfig:
    """Dimensions of a MIMO-OSDM link.

    Parameters
    ----------
    U, V : int
        Number of transmitters and receivers.
    M, N : int
        Vector length and number of vectors per block; K = M * N.
    L : int
        Channel order (number of taps minus one).
    Q : int
        Discrete Doppler spread, i.e. guard vectors at each block edge and
        the block semi-bandwidth of the banded TV model. 0 for TI links.
    sigma2 : float
        Noise variance per received sample (unit symbol power).
    cp_len : int, optional
        Cyclic prefix length; defaults to L.
    """

    U: int
    V: int
    M: int
    N: int
    L: int = 0
    Q: int = 0
    sigma2: float = 0.0
    cp_len: int = None

    def __post_init__(self):
        for name in ("U", "V", "M", "N"):
            check_count(getattr(self, name), name)
        check_count(self.L, "L", minimum=0)
        check_count(self.Q, "Q", minimum=0)
        check_sigma2(self.sigma2)
        if self.cp_len is None:
            object.__setattr__(self, "cp_len", self.L)
        check_count(self.cp_len, "cp_len", minimum=0)
        if self.cp_len < self.L:
            raise ConfigurationError(
                f"cp_len ({self.cp_len}) must cover the channel order L ({self.L})"
            )
        if self.cp_len > self.K:
            raise ConfigurationError(f"cp_len ({self.cp_len}) exceeds K ({self.K})")
        if 2 * self.Q >= self.N:
            raise ConfigurationError(f"need 2Q < N, got Q={self.Q}, N={self.N}")

    @property
    def K(self):
        return self.M * self.N

    @property
    def N_payload(self):
        """Payload vectors per block once Q guard vectors sit at each edge."""
        return self.N - 2 * self.Q

    @property
    def K_payload(self):
        return self.M * self.N_payload

    @property
    def payload_fraction(self):
        return self.N_payload / self.N

    def replace(self, **changes):
        fields = asdict(self)
        fields.update(changes)
        if "L" in changes and "cp_len" not in changes:
            fields["cp_len"] = None
        return MimoOsdmConfig(**fields)


def _blocks(x, M, name):
    x = as_complex_array(x, name, ndim=1, allow_nd=True)
    K = x.shape[-1]
    M = check_count(M, "M")
    if K == 0 or K % M:
        raise DimensionError(f"{name} length {K} is not a multiple of M={M}")
    return x.reshape(x.shape[:-1] + (K // M, M))


def osdm_modulate(d, M):
    """``s = (F_N^H kron I_M) d`` as M interleaved N-point IDFTs."""
    blocks = _blocks(d, M, "d")
    s = np.fft.ifft(blocks, axis=-2, norm="ortho")
    return s.reshape(s.shape[:-2] + (-1,))


def osdm_demodulate(r, M):
    """``x = (F_N kron I_M) r`` (CP already removed)."""
    blocks = _blocks(r, M, "r")
    x = np.fft.fft(blocks, axis=-2, norm="ortho")
    return x.reshape(x.shape[:-2] + (-1,))


def add_cp(s, cp_len):
    """Prepend the last ``cp_len`` samples of each block."""
    s = as_complex_array(s, "s", ndim=1, allow_nd=True)
    cp_len = check_count(cp_len, "cp_len", minimum=0)
    if cp_len > s.shape[-1]:
        raise ConfigurationError(f"cp_len ({cp_len}) exceeds block length {s.shape[-1]}")
    if cp_len == 0:
        return s.copy()
    return np.concatenate([s[..., -cp_len:], s], axis=-1)


def remove_cp(r, cp_len):
    """Drop the first ``cp_len`` samples of each block."""
    r = as_complex_array(r, "r", ndim=1, allow_nd=True)
    cp_len = check_count(cp_len, "cp_len", minimum=0)
    if cp_len > r.shape[-1]:
        raise ConfigurationError(f"cp_len ({cp_len}) exceeds block length {r.shape[-1]}")
    return r[..., cp_len:].copy()


def partition_vectors(x, M):
    """Split a length-K block into its N consecutive length-M vectors, shape (..., N, M)."""
    return _blocks(x, M, "x")


def stack_streams(vectors):
    """Stack per-stream vectors ``[x^(1); x^(2); ...]`` into one column."""
    parts = [np.asarray(v, dtype=np.complex128).reshape(-1) for v in vectors]
    if not parts:
        raise DimensionError("nothing to stack")
    if len({p.size for p in parts}) != 1:
        raise DimensionError("all streams must have the same length")
    return np.concatenate(parts)


def insert_guard_vectors(payload, cfg):
    """Surround the payload with Q zero vectors on each side: [0_{MQ}; payload; 0_{MQ}]."""
    payload = as_complex_array(payload, "payload", ndim=1, allow_nd=True)
    if 2 * cfg.Q >= cfg.N:
        raise ConfigurationError(f"need 2Q < N, got Q={cfg.Q}, N={cfg.N}")
    if payload.shape[-1] != cfg.K_payload:
        raise DimensionError(
            f"payload must have length {cfg.K_payload}, got {payload.shape[-1]}"
        )
    pad = [(0, 0)] * (payload.ndim - 1) + [(cfg.Q * cfg.M, cfg.Q * cfg.M)]
    return np.pad(payload, pad)


def truncate_guard(x, cfg):
    """Keep samples QM .. (N-Q)M-1 of each block, discarding the guard vectors."""
    x = as_complex_array(x, "x", ndim=1, allow_nd=True)
    if 2 * cfg.Q >= cfg.N:
        raise ConfigurationError(f"need 2Q < N, got Q={cfg.Q}, N={cfg.N}")
    if x.shape[-1] != cfg.K:
        raise DimensionError(f"x must have length {cfg.K}, got {x.shape[-1]}")
    return x[..., cfg.Q * cfg.M : (cfg.N - cfg.Q) * cfg.M].copy()


def papr_db(s):
    """Peak-to-average power ratio of each block (last axis), in dB, at symbol rate."""
    p = np.abs(np.asarray(s)) ** 2
    return 10 * np.log10(p.max(axis=-1) / p.mean(axis=-1))
