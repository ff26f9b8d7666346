"""MIMO channel models.

Time-invariant links are tap vectors c^(v,u) of length L+1. Time-varying
links are either a sampled tap trace c_{k,l} or a complex-exponential
basis expansion (CE-BEM)

    c_{k,l} = sum_{q=-Q}^{Q} h_{q,l} exp(j 2 pi q k / K),

with k = 0 at the first sample after the cyclic prefix (negative k inside
the prefix). Taps are indexed by output time: r_k = sum_l c_{k,l} s_{k-l}.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import as_complex_array, check_count, check_sigma2
from .exceptions import DimensionError
from .modem import osdm_demodulate

__all__ = [
    "CirSet",
    "BemCirSet",
    "TvCirTrace",
    "freq_response",
    "gen_ti_channel",
    "gen_tv_channel",
    "fit_bem",
    "apply_channel_ti",
    "apply_channel_tv",
    "time_domain_matrix",
    "composite_channel_dense",
    "save_channel",
    "load_channel",
]


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _awgn(rng, shape, sigma2):
    if sigma2 == 0:
        return np.zeros(shape, dtype=np.complex128)
    return np.sqrt(sigma2 / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class CirSet:
    """Time-invariant taps, ``taps[v, u, l]`` for the link u -> v."""

    taps: np.ndarray

    def __post_init__(self):
        taps = as_complex_array(self.taps, "taps", ndim=3)
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def V(self):
        return self.taps.shape[0]

    @property
    def U(self):
        return self.taps.shape[1]

    @property
    def L(self):
        return self.taps.shape[2] - 1

    def freq_response(self, K):
        """H_k = sum_l c_l exp(-j 2 pi l k / K), shape (V, U, K)."""
        if self.L + 1 > K:
            raise DimensionError(f"channel order {self.L} does not fit in K={K}")
        return np.fft.fft(self.taps, n=K, axis=-1)

    def as_bem(self):
        return BemCirSet(self.taps[:, :, None, :])


@dataclass(frozen=True)
class BemCirSet:
    """CE-BEM coefficients, ``coeffs[v, u, q + Q, l]`` = h_{q,l}^{(v,u)}."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = as_complex_array(self.coeffs, "coeffs", ndim=4)
        if c.shape[2] % 2 != 1:
            raise DimensionError(f"need 2Q+1 Doppler branches, got {c.shape[2]}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def V(self):
        return self.coeffs.shape[0]

    @property
    def U(self):
        return self.coeffs.shape[1]

    @property
    def Q(self):
        return (self.coeffs.shape[2] - 1) // 2

    @property
    def L(self):
        return self.coeffs.shape[3] - 1

    def branch(self, q):
        return self.coeffs[:, :, q + self.Q, :]

    def freq_response(self, K):
        """H_{q,k} = sum_l h_{q,l} exp(-j 2 pi l k / K), shape (V, U, 2Q+1, K)."""
        if self.L + 1 > K:
            raise DimensionError(f"channel order {self.L} does not fit in K={K}")
        return np.fft.fft(self.coeffs, n=K, axis=-1)

    def trace(self, K, cp_len=0):
        """Sample the expansion at k = -cp_len .. K-1."""
        k = np.arange(-cp_len, K)
        q = np.arange(-self.Q, self.Q + 1)
        basis = np.exp(2j * np.pi * np.outer(q, k) / K)  # (2Q+1, T)
        taps = np.einsum("vuql,qt->vutl", self.coeffs, basis)
        return TvCirTrace(taps, cp_len)


@dataclass(frozen=True)
class TvCirTrace:
    """Time-varying taps ``taps[v, u, t, l]`` for t = 0 .. cp_len + K - 1.

    Time index t counts samples of the CP-extended block, so post-prefix
    sample k sits at t = k + cp_len.
    """

    taps: np.ndarray
    cp_len: int = 0

    def __post_init__(self):
        taps = as_complex_array(self.taps, "taps", ndim=4)
        check_count(self.cp_len, "cp_len", minimum=0)
        if taps.shape[2] <= self.cp_len:
            raise DimensionError("trace shorter than its cyclic prefix")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def V(self):
        return self.taps.shape[0]

    @property
    def U(self):
        return self.taps.shape[1]

    @property
    def L(self):
        return self.taps.shape[3] - 1

    @property
    def K(self):
        return self.taps.shape[2] - self.cp_len

    def post_cp(self):
        return self.taps[:, :, self.cp_len :, :]

    def is_constant(self, atol=0.0):
        return bool(np.all(np.abs(self.taps - self.taps[:, :, :1, :]) <= atol))

    def to_cirset(self):
        """Collapse a time-invariant trace to its taps."""
        if not self.is_constant(atol=1e-12):
            raise ValueError("trace is time varying")
        return CirSet(self.taps[:, :, 0, :])


def freq_response(channel, K):
    """Frequency-response table of a CirSet or BemCirSet over K tones."""
    return channel.freq_response(K)


def gen_ti_channel(cfg, rng_seed=None):
    """Rayleigh taps with a uniform power delay profile and unit total power per link."""
    rng = _rng(rng_seed)
    shape = (cfg.V, cfg.U, cfg.L + 1)
    taps = _awgn(rng, shape, 1.0 / (cfg.L + 1))
    return CirSet(taps)


def gen_tv_channel(cfg, fd_T, rng_seed=None, n_sinusoids=64):
    """Rayleigh taps with a U-shaped (Jakes) Doppler spectrum, by sum of sinusoids.

    Every tap of every link is an independent process

        c(t) = sqrt(p / S) sum_s exp(j (2 pi nu cos(alpha_s) k + phi_s)),

    with nu = fd_T / K cycles per sample, S = ``n_sinusoids``, and angles
    alpha_s and phases phi_s drawn uniformly. Its autocorrelation tends to
    p J0(2 pi nu tau). The power delay profile is uniform, p = 1 / (L + 1).
    """
    if fd_T < 0:
        raise ValueError(f"fd_T must be >= 0, got {fd_T}")
    n_sinusoids = check_count(n_sinusoids, "n_sinusoids")
    rng = _rng(rng_seed)
    K, cp = cfg.K, cfg.cp_len
    k = np.arange(-cp, K)
    shape = (cfg.V, cfg.U, cfg.L + 1, n_sinusoids)
    alpha = rng.uniform(0, 2 * np.pi, shape)
    phi = rng.uniform(0, 2 * np.pi, shape)
    omega = 2 * np.pi * (fd_T / K) * np.cos(alpha)
    # split k = k0 + hi*B + lo so the sinusoid sum becomes a batched matmul:
    # sum_s [e^{j(w k0 + phi)} e^{j w hi B}] e^{j w lo}
    B = max(1, int(np.sqrt(k.size)))
    n_hi = -(-k.size // B)
    hi = np.exp(1j * (omega[..., None, :] * (k[0] + B * np.arange(n_hi))[:, None] + phi[..., None, :]))
    lo = np.exp(1j * omega[..., :, None] * np.arange(B))
    taps = (hi @ lo).reshape(shape[:-1] + (n_hi * B,))[..., : k.size]
    taps *= np.sqrt(1.0 / ((cfg.L + 1) * n_sinusoids))
    return TvCirTrace(np.swapaxes(taps, 2, 3), cp)


def fit_bem(trace, Q):
    """Least-squares CE-BEM fit of a trace over its post-prefix samples.

    The exponentials are orthogonal on k = 0..K-1, so the LS coefficient of
    branch q is the q-th DFT sample of the tap trajectory divided by K.
    """
    Q = check_count(Q, "Q", minimum=0)
    K = trace.K
    if 2 * Q + 1 > K:
        raise DimensionError(f"2Q+1 = {2 * Q + 1} basis functions exceed K = {K}")
    spectrum = np.fft.fft(trace.post_cp(), axis=2) / K  # (V, U, K, L+1)
    q = np.arange(-Q, Q + 1) % K
    return BemCirSet(spectrum[:, :, q, :])


def _check_tx(s, U):
    s = as_complex_array(s, "s", ndim=2)
    if s.shape[0] != U:
        raise DimensionError(f"expected {U} transmit streams, got {s.shape[0]}")
    return s


def apply_channel_ti(cir, s, sigma2=0.0, rng=None):
    """Pass CP-extended transmit blocks ``s`` (U, T) through the TI channel.

    Returns the (V, T) received samples: linear convolution truncated to
    the block plus circular AWGN of variance ``sigma2``. After removing a
    prefix of length >= L the result is sum_u C~^(v,u) s^(u) + w^(v).
    """
    s = _check_tx(s, cir.U)
    sigma2 = check_sigma2(sigma2)
    T = s.shape[1]
    r = np.zeros((cir.V, T), dtype=np.complex128)
    for v in range(cir.V):
        for u in range(cir.U):
            r[v] += np.convolve(s[u], cir.taps[v, u])[:T]
    return r + _awgn(_rng(rng), r.shape, sigma2)


def apply_channel_tv(channel, s, sigma2=0.0, rng=None, cp_len=0):
    """Pass CP-extended blocks through a time-varying channel.

    ``channel`` is a TvCirTrace covering every transmitted sample, or a
    BemCirSet that is sampled at k = -cp_len .. K-1 with K = T - cp_len.
    """
    if isinstance(channel, BemCirSet):
        channel = channel.trace(s.shape[-1] - cp_len, cp_len)
    s = _check_tx(s, channel.U)
    sigma2 = check_sigma2(sigma2)
    T, L = s.shape[1], channel.L
    if channel.taps.shape[2] != T:
        raise DimensionError(f"trace has {channel.taps.shape[2]} samples, signal has {T}")
    padded = np.concatenate([np.zeros((s.shape[0], L), dtype=np.complex128), s], axis=1)
    # delayed[u, t, l] = s[u, t - l]
    idx = np.arange(T)[:, None] - np.arange(L + 1)[None, :] + L
    delayed = padded[:, idx]
    r = np.einsum("vutl,utl->vt", channel.taps, delayed)
    return r + _awgn(_rng(rng), r.shape, sigma2)


def time_domain_matrix(channel, K):
    """Dense K x K post-prefix channel matrices C~^(v,u), shape (V, U, K, K).

    Circulant for a CirSet, sum_q Gamma_q circ(h_q) for a BemCirSet, and
    the exact time-varying matrix C~[k, (k - l) mod K] = c_{k,l} for a
    TvCirTrace. Test-oracle scale only.
    """
    if isinstance(channel, CirSet):
        channel = channel.as_bem()
    if isinstance(channel, BemCirSet):
        taps = channel.trace(K).post_cp()
    else:
        if channel.K != K:
            raise DimensionError(f"trace covers K={channel.K}, asked for K={K}")
        taps = channel.post_cp()
    V, U, _, L1 = taps.shape
    if L1 > K:
        raise DimensionError(f"channel order {L1 - 1} does not fit in K={K}")
    out = np.zeros((V, U, K, K), dtype=np.complex128)
    k = np.arange(K)
    for l in range(L1):
        out[:, :, k, (k - l) % K] += taps[:, :, :, l]
    return out


def composite_channel_dense(channel, M, K=None):
    """Composite matrices C = (F_N kron I_M) C~ (F_N^H kron I_M), shape (V, U, K, K).

    TI inputs give block-diagonal matrices; CE-BEM inputs are cyclically
    block banded with block semi-bandwidth Q. Test-oracle scale only.
    """
    if K is None:
        if not isinstance(channel, TvCirTrace):
            raise ValueError("K is required for CirSet and BemCirSet inputs")
        K = channel.K
    ct = time_domain_matrix(channel, K)
    left = np.swapaxes(osdm_demodulate(np.swapaxes(ct, -1, -2), M), -1, -2)
    both = osdm_demodulate(left.conj(), M).conj()
    return both


def save_channel(path, channel):
    """Write a CirSet or BemCirSet as CSV rows ``v,u,q,l,re,im``."""
    if isinstance(channel, CirSet):
        kind, coeffs = "cir", channel.as_bem().coeffs
    elif isinstance(channel, BemCirSet):
        kind, coeffs = "bem", channel.coeffs
    else:
        raise TypeError("only CirSet and BemCirSet can be exported")
    V, U, nq, L1 = coeffs.shape
    Q = (nq - 1) // 2
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# kind={kind} V={V} U={U} L={L1 - 1} Q={Q}\n")
        w = csv.writer(fh)
        w.writerow(["v", "u", "q", "l", "re", "im"])
        for (v, u, qi, l), c in np.ndenumerate(coeffs):
            w.writerow([v, u, qi - Q, l, repr(float(c.real)), repr(float(c.imag))])
    return path


def load_channel(path):
    """Read a channel written by :func:`save_channel`."""
    path = Path(path)
    with path.open(newline="") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing channel header line")
        meta = dict(item.split("=") for item in header[1:].split())
        V, U, L, Q = (int(meta[k]) for k in ("V", "U", "L", "Q"))
        coeffs = np.zeros((V, U, 2 * Q + 1, L + 1), dtype=np.complex128)
        for row in csv.DictReader(fh):
            coeffs[int(row["v"]), int(row["u"]), int(row["q"]) + Q, int(row["l"])] = complex(
                float(row["re"]), float(row["im"])
            )
    if meta["kind"] == "cir":
        return CirSet(coeffs[:, :, 0, :])
    return BemCirSet(coeffs)
