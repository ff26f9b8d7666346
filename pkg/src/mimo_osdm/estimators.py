"""scikit-learn style front ends for the equalizers.

``fit`` takes a channel realization and precomputes whatever the chosen
route needs; ``predict`` maps demodulated observations to symbol
estimates. Hyper-parameters live in ``__init__`` so ``get_params`` /
``set_params`` / ``clone`` work as usual::

    eq = TiMmseEqualizer(M=16, sigma2=0.01).fit(cir, K=1024)
    d_hat = eq.predict(x)          # x: (V, K) -> (U, K)
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count, check_sigma2, check_streams
from .channel import CirSet, TvCirTrace, fit_bem
from .equalizer_ti import build_pervector_channel, equalize_ti_direct, equalize_ti_fast
from .equalizer_tv import (
    build_tv_banded_channel,
    equalize_tv_direct,
    equalize_tv_fast,
    truncated_channel_dense,
)
from .exceptions import ConfigurationError
from .modem import MimoOsdmConfig

__all__ = ["TiMmseEqualizer", "TvMmseEqualizer"]


def _batched(predict_one, X, V, length):
    X = check_streams(X, V, length, name="X")
    if X.ndim == 2:
        return predict_one(X)
    flat = X.reshape((-1, V, length))
    out = np.stack([predict_one(x) for x in flat])
    return out.reshape(X.shape[:-2] + out.shape[-2:])


class TiMmseEqualizer(BaseEstimator):
    """Per-vector MMSE equalizer for time-invariant channels.

    Parameters
    ----------
    M : int
        OSDM vector length.
    sigma2 : float
        Noise variance used in the MMSE weighting.
    method : {"fast", "direct"}
        Transformed-domain per-tone solve, or the dense per-vector solve.
    """

    def __init__(self, M=1, sigma2=0.0, method="fast"):
        self.M = M
        self.sigma2 = sigma2
        self.method = method

    def fit(self, channel, K=None):
        """Store the frequency table of ``channel`` (a CirSet or a (V, U, K) table)."""
        M = check_count(self.M, "M")
        check_sigma2(self.sigma2)
        if self.method not in ("fast", "direct"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if isinstance(channel, CirSet):
            if K is None:
                raise ValueError("K is required when fitting on a CirSet")
            freq = channel.freq_response(K)
        else:
            freq = np.asarray(channel, dtype=np.complex128)
            if freq.ndim != 3:
                raise ValueError(f"frequency table must be (V, U, K), got {freq.shape}")
        if freq.shape[-1] % M:
            raise ConfigurationError(f"K={freq.shape[-1]} is not a multiple of M={M}")
        self.freq_ = freq
        self.n_receivers_, self.n_transmitters_, self.block_length_ = freq.shape
        return self

    def _predict_one(self, x):
        if self.method == "fast":
            return equalize_ti_fast(self.freq_, self.M, x, self.sigma2)
        M, K = self.M, self.block_length_
        out = np.empty((self.n_transmitters_, K), dtype=np.complex128)
        for n in range(K // M):
            sl = slice(n * M, (n + 1) * M)
            h = build_pervector_channel(self.freq_, M, n)
            out[:, sl] = equalize_ti_direct(h, x[:, sl].reshape(-1), self.sigma2).reshape(-1, M)
        return out

    def predict(self, X):
        """Equalize demodulated blocks of shape (V, K), or a batch (..., V, K)."""
        check_is_fitted(self, "freq_")
        return _batched(self._predict_one, X, self.n_receivers_, self.block_length_)


class TvMmseEqualizer(BaseEstimator):
    """Block MMSE equalizer for time-varying channels with guard vectors.

    Parameters
    ----------
    M : int
        OSDM vector length.
    Q : int
        Guard vectors per block edge; also the BEM order fitted when a
        trace is passed to the fast route.
    sigma2 : float
        Noise variance.
    method : {"fast", "direct"}
        Banded LDL^H solve on the CE-BEM model, or the dense solve on
        whatever channel was given (exact BEM or true trace).
    """

    def __init__(self, M=1, Q=1, sigma2=0.01, method="fast"):
        self.M = M
        self.Q = Q
        self.sigma2 = sigma2
        self.method = method

    def fit(self, channel, K=None):
        """Prepare the equalizer for ``channel`` (BemCirSet, TvCirTrace or CirSet)."""
        M = check_count(self.M, "M")
        Q = check_count(self.Q, "Q", minimum=0)
        check_sigma2(self.sigma2, strict=self.method == "fast")
        if self.method not in ("fast", "direct"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if isinstance(channel, TvCirTrace):
            K = channel.K
        elif K is None:
            raise ValueError("K is required for CirSet and BemCirSet channels")
        if K % M:
            raise ConfigurationError(f"K={K} is not a multiple of M={M}")
        self.config_ = MimoOsdmConfig(
            U=channel.U, V=channel.V, M=M, N=K // M, L=channel.L, Q=Q
        )
        if self.method == "fast":
            if isinstance(channel, TvCirTrace):
                channel = fit_bem(channel, Q)
            elif isinstance(channel, CirSet):
                channel = channel.as_bem()
            self.system_ = build_tv_banded_channel(channel, self.config_)
        else:
            self.system_ = truncated_channel_dense(channel, self.config_)
        return self

    def _predict_one(self, x):
        if self.method == "fast":
            return equalize_tv_fast(self.system_, x, self.sigma2)
        return equalize_tv_direct(self.system_, x, self.sigma2)

    def predict(self, X):
        """Equalize truncated observations of shape (V, K_payload), or a batch."""
        check_is_fitted(self, "system_")
        cfg = self.config_
        return _batched(self._predict_one, X, cfg.V, cfg.K_payload)
