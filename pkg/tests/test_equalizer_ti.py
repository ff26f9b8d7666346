import numpy as np
import pytest

from conftest import crandn
from mimo_osdm.channel import CirSet, composite_channel_dense
from mimo_osdm.equalizer_ti import (
    build_pervector_channel,
    equalize_ti_direct,
    equalize_ti_fast,
    interleaved_channel,
    small_mmse_solve,
)
from mimo_osdm.exceptions import SingularityError
from mimo_osdm.flops import FlopCounter
from mimo_osdm.linalg import StridePermutation, dft_matrix


def random_ti(rng, U, V, M, N, L):
    cir = CirSet(crandn(rng, V, U, L + 1) / np.sqrt(2 * (L + 1)))
    return cir, cir.freq_response(M * N)


def direct_all(freq, M, x, sigma2):
    V, U, K = freq.shape
    out = np.empty((U, K), dtype=complex)
    for n in range(K // M):
        sl = slice(n * M, (n + 1) * M)
        out[:, sl] = equalize_ti_direct(build_pervector_channel(freq, M, n), x[:, sl].reshape(-1), sigma2).reshape(U, M)
    return out


class TestPerVectorChannel:
    def test_matches_dense_composite(self, rng):
        U, V, M, N = 2, 3, 4, 8
        cir, freq = random_ti(rng, U, V, M, N, 3)
        comp = composite_channel_dense(cir, M, M * N)
        for n in range(N):
            sl = slice(n * M, (n + 1) * M)
            ref = np.block([[comp[v, u][sl, sl] for u in range(U)] for v in range(V)])
            np.testing.assert_allclose(build_pervector_channel(freq, M, n), ref, atol=1e-12)

    def test_index_out_of_range(self, rng):
        _, freq = random_ti(rng, 1, 1, 2, 4, 1)
        with pytest.raises(IndexError):
            build_pervector_channel(freq, 2, 4)

    def test_interleaved_is_block_diagonal(self, rng):
        U, V, M, N = 2, 3, 4, 4
        _, freq = random_ti(rng, U, V, M, N, 2)
        n = 1
        hbar = np.block([[np.diag(freq[v, u, n::N]) for u in range(U)] for v in range(V)])
        pv, pu = StridePermutation(V, M).to_dense(), StridePermutation(U, M).to_dense()
        g = pv @ hbar @ pu.T
        ours = interleaved_channel(freq, M, n).to_dense()
        np.testing.assert_allclose(g, ours, atol=1e-14)
        mask = np.kron(np.eye(M), np.ones((V, U))) == 0
        assert np.abs(g[mask]).max() == 0
        # transforming H_n with the per-vector DFT recovers Hbar_n
        f = dft_matrix(M)
        t = f * np.exp(-2j * np.pi * n * np.arange(M) / (M * N))[None, :]
        phi_v, phi_u = np.kron(np.eye(V), t), np.kron(np.eye(U), t)
        np.testing.assert_allclose(phi_v @ build_pervector_channel(freq, M, n) @ phi_u.conj().T, hbar, atol=1e-12)


class TestSmallMmse:
    def test_against_dense(self, rng):
        g, y = crandn(rng, 5, 3, 2), crandn(rng, 5, 3)
        out = small_mmse_solve(g, y, 0.2)
        for i in range(5):
            ref = np.linalg.solve(g[i].conj().T @ g[i] + 0.2 * np.eye(2), g[i].conj().T @ y[i])
            np.testing.assert_allclose(out[i], ref, atol=1e-12)

    def test_singular(self):
        g = np.ones((1, 2, 2))
        with pytest.raises(SingularityError):
            small_mmse_solve(g, np.ones((1, 2)), 0.0)


class TestFastEqualizer:
    def test_siso_per_tone(self, rng):
        M, N = 4, 4
        _, freq = random_ti(rng, 1, 1, M, N, 3)
        x = crandn(rng, 1, M * N)
        sigma2 = 0.3
        out = equalize_ti_fast(freq, M, x, sigma2)
        # scalar MMSE on each tone of the per-vector transform
        t = lambda n: dft_matrix(M) * np.exp(-2j * np.pi * n * np.arange(M) / (M * N))[None, :]
        for n in range(N):
            h = freq[0, 0, n::N]
            y = t(n) @ x[0, n * M : (n + 1) * M]
            a = h.conj() * y / (np.abs(h) ** 2 + sigma2)
            np.testing.assert_allclose(out[0, n * M : (n + 1) * M], t(n).conj().T @ a, atol=1e-12)

    def test_example_config(self, rng):
        _, freq = random_ti(rng, 2, 3, 4, 8, 3)
        x = crandn(rng, 3, 32)
        fast, ref = equalize_ti_fast(freq, 4, x, 0.1), direct_all(freq, 4, x, 0.1)
        assert np.abs(fast - ref).max() / np.abs(ref).max() < 1e-9

    @pytest.mark.parametrize("seed", range(25))
    def test_random_equivalence(self, seed):
        rng = np.random.default_rng(seed)
        V = int(rng.integers(1, 5))
        U = int(rng.integers(1, min(3, V) + 1))
        M, N = int(rng.choice([2, 4, 8])), int(rng.choice([4, 8]))
        L = int(rng.integers(0, M + 1))
        sigma2 = float(rng.choice([0.0, 0.01, 1.0]))
        _, freq = random_ti(rng, U, V, M, N, L)
        x = crandn(rng, V, M * N)
        fast, ref = equalize_ti_fast(freq, M, x, sigma2), direct_all(freq, M, x, sigma2)
        assert np.abs(fast - ref).max() / np.abs(ref).max() < 1e-9

    def test_zero_noise_rank_deficient_raises(self):
        freq = np.ones((1, 2, 8), dtype=complex)
        with pytest.raises(SingularityError):
            equalize_ti_fast(freq, 2, np.ones((1, 8)), 0.0)

    def test_flop_ratio(self, rng):
        U, V, M, N = 2, 3, 16, 4
        _, freq = random_ti(rng, U, V, M, N, 5)
        x = crandn(rng, V, M * N)
        with FlopCounter() as fast:
            equalize_ti_fast(freq, M, x, 0.1)
        with FlopCounter() as direct:
            direct_all(freq, M, x, 0.1)
        assert fast.total / direct.total < 0.05

    def test_fast_cost_linear_in_m(self, rng):
        def cost(M):
            _, freq = random_ti(rng, 2, 3, M, 4, 1)
            with FlopCounter() as fc:
                equalize_ti_fast(freq, M, crandn(rng, 3, 4 * M), 0.1)
            return fc.total

        assert cost(32) == 2 * cost(16)
