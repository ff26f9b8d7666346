"""Quick numerical self checks run by ``mimo-osdm selftest``."""

import numpy as np

from .channel import BemCirSet, gen_ti_channel
from .equalizer_ti import build_pervector_channel, equalize_ti_direct, equalize_ti_fast
from .equalizer_tv import (
    build_tv_banded_channel,
    equalize_tv_direct,
    equalize_tv_fast,
    truncated_channel_dense,
)
from .linalg import (
    HermitianBlockBandedMatrix,
    StridePermutation,
    block_ldlh_factor,
    block_ldlh_solve,
    dft_matrix,
)
from .modem import MimoOsdmConfig, osdm_demodulate, osdm_modulate
from .sim import SimCampaign, run_ber_point


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _relerr(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


def _checks(rng):
    f = dft_matrix(32)
    yield "dft unitary", np.abs(f @ f.conj().T - np.eye(32)).max(), 1e-12

    x = _crandn(rng, 15)
    p = StridePermutation(3, 5)
    yield "stride permutation inverse", np.abs(p.inverse.apply(p.apply(x)) - x).max(), 0.0

    d = _crandn(rng, 2, 64)
    yield "modem roundtrip", np.abs(osdm_demodulate(osdm_modulate(d, 8), 8) - d).max(), 1e-12

    b, nb, w = 2, 24, 2
    g = _crandn(rng, nb * b, nb * b) * np.kron(
        np.abs(np.subtract.outer(np.arange(nb), np.arange(nb))) <= 1, np.ones((b, b))
    )
    r = g.conj().T @ g + 0.1 * np.eye(nb * b)
    rhs = _crandn(rng, nb * b)
    fac = block_ldlh_factor(HermitianBlockBandedMatrix.from_dense(r, b, w))
    yield "block LDL^H solve", _relerr(block_ldlh_solve(fac, rhs), np.linalg.solve(r, rhs)), 1e-9

    cfg = MimoOsdmConfig(U=2, V=3, M=4, N=8, L=3)
    freq = gen_ti_channel(cfg, rng).freq_response(cfg.K)
    x = _crandn(rng, 3, cfg.K)
    fast = equalize_ti_fast(freq, cfg.M, x, 0.1)
    err = 0.0
    for n in range(cfg.N):
        sl = slice(n * cfg.M, (n + 1) * cfg.M)
        ref = equalize_ti_direct(build_pervector_channel(freq, cfg.M, n), x[:, sl].reshape(-1), 0.1)
        err = max(err, _relerr(fast[:, sl].reshape(-1), ref))
    yield "TI fast vs direct", err, 1e-9

    cfg = MimoOsdmConfig(U=2, V=3, M=4, N=16, L=3, Q=1)
    bem = BemCirSet(_crandn(rng, 3, 2, 3, 4) / 4)
    x = _crandn(rng, 3, cfg.K_payload)
    fast = equalize_tv_fast(build_tv_banded_channel(bem, cfg), x, 0.1)
    ref = equalize_tv_direct(truncated_channel_dense(bem, cfg), x, 0.1)
    yield "TV fast vs direct", _relerr(fast, ref), 1e-8

    camp = SimCampaign(MimoOsdmConfig(U=2, V=3, M=16, N=16, L=8), max_blocks=5, snr_grid=(60,))
    yield "noiseless TI chain BER", run_ber_point(camp, 60.0).ber, 0.0


def run_selftest(seed=0, out=print):
    """Run every check, print one PASS/FAIL line each, return overall success."""
    rng = np.random.default_rng(seed)
    ok = True
    for name, value, tol in _checks(rng):
        passed = value <= tol
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name:<28} {value:.3e} (tol {tol:g})")
    return ok
