"""Monte Carlo BER campaigns and complexity benchmarks.

SNR convention: ``snr_db = 10 log10(1 / sigma2)`` with unit average
symbol power per transmitter, measured per receive antenna. Every block
trial draws its own channel, payload and noise from a generator seeded by
``(seed, snr_index, trial_index)``, so results do not depend on how the
trials are scheduled.
"""

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import flops
from .channel import (
    BemCirSet,
    CirSet,
    apply_channel_ti,
    apply_channel_tv,
    fit_bem,
    gen_ti_channel,
    gen_tv_channel,
)
from .equalizer_ti import build_pervector_channel, equalize_ti_direct, equalize_ti_fast
from .equalizer_tv import (
    build_tv_banded_channel,
    equalize_tv_direct,
    equalize_tv_fast,
    truncated_channel_dense,
)
from .exceptions import ConfigurationError
from .modem import (
    MimoOsdmConfig,
    add_cp,
    insert_guard_vectors,
    osdm_demodulate,
    osdm_modulate,
    remove_cp,
    truncate_guard,
)

log = logging.getLogger(__name__)

EQUALIZERS = ("ti_direct", "ti_fast", "tv_direct_true", "tv_direct_bem", "tv_fast")

# "identity" links transmitter u straight to receiver u (needs V >= U)
CHANNELS = ("ti", "tv", "identity")

CSV_COLUMNS = ("snr_db", "ber", "ci_low", "ci_high", "bits", "errors", "flops_equalizer_mean")

SNR_NOTE = (
    "# snr_db = 10*log10(1/sigma2); unit symbol power per transmitter; "
    "noise variance per receive antenna sample"
)

__all__ = [
    "EQUALIZERS",
    "qpsk_map",
    "qpsk_demap",
    "wilson_interval",
    "SimCampaign",
    "BerPoint",
    "SimResult",
    "run_ber_point",
    "run_campaign",
    "BenchRow",
    "run_complexity_bench",
    "loglog_slope",
]


# Gray mapping: first bit -> sign of I, second bit -> sign of Q, 0 -> +.
def qpsk_map(bits):
    """Map bit pairs to unit-power QPSK symbols; ``00 -> (1 + 1j) / sqrt(2)``."""
    bits = np.asarray(bits)
    if bits.shape[-1] % 2:
        raise ValueError(f"QPSK needs an even number of bits, got {bits.shape[-1]}")
    pairs = bits.reshape(bits.shape[:-1] + (-1, 2)).astype(float)
    return ((1 - 2 * pairs[..., 0]) + 1j * (1 - 2 * pairs[..., 1])) / np.sqrt(2)


def qpsk_demap(symbols):
    """Minimum-distance hard decisions back to bits."""
    symbols = np.asarray(symbols)
    bits = np.stack([symbols.real < 0, symbols.imag < 0], axis=-1).astype(np.uint8)
    return bits.reshape(bits.shape[:-2] + (-1,))


def wilson_interval(errors, bits, z=1.96):
    """Binomial (Wilson score) confidence interval for an error rate."""
    if bits == 0:
        return 0.0, 1.0
    p = errors / bits
    denom = 1 + z * z / bits
    centre = (p + z * z / (2 * bits)) / denom
    half = z * math.sqrt(p * (1 - p) / bits + z * z / (4 * bits * bits)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class SimCampaign:
    """One BER curve: a link configuration, channel model, equalizer and SNR grid.

    ``config.Q`` is the guard count per block edge (and the BEM order for
    ``tv_fast`` / ``tv_direct_bem``); it must be 0 for the TI equalizers.
    With ``charge_guard_loss`` the per-symbol SNR is reduced by the payload
    fraction N_payload / N.
    """

    config: MimoOsdmConfig
    equalizer: str = "ti_fast"
    channel: str = "ti"
    fd_T: float = 0.0
    snr_grid: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    min_errors: int = 200
    max_blocks: int = 2000
    seed: int = 0
    n_sinusoids: int = 64
    charge_guard_loss: bool = False

    def __post_init__(self):
        object.__setattr__(self, "snr_grid", tuple(float(s) for s in self.snr_grid))
        if not self.snr_grid:
            raise ConfigurationError("snr_grid must not be empty")
        if self.equalizer not in EQUALIZERS:
            raise ConfigurationError(
                f"unknown equalizer {self.equalizer!r}; choose from {', '.join(EQUALIZERS)}"
            )
        if self.channel not in CHANNELS:
            raise ConfigurationError(
                f"channel must be one of {', '.join(CHANNELS)}, got {self.channel!r}"
            )
        if self.channel == "identity" and self.config.V < self.config.U:
            raise ConfigurationError("the identity channel needs V >= U")
        if self.min_errors < 1 or self.max_blocks < 1:
            raise ConfigurationError("min_errors and max_blocks must be positive")
        if self.fd_T < 0:
            raise ConfigurationError(f"fd_T must be >= 0, got {self.fd_T}")
        if self.equalizer.startswith("ti_"):
            if self.channel == "tv":
                raise ConfigurationError(f"{self.equalizer} needs a time-invariant channel")
            if self.config.Q:
                raise ConfigurationError(f"{self.equalizer} does not use guard vectors; set Q=0")
        if self.equalizer in ("tv_fast", "tv_direct_bem") and self.config.Q == 0 and self.channel == "tv":
            log.warning("Q=0 with a time-varying channel: the BEM keeps only the mean taps")

    def sigma2(self, snr_db):
        if snr_db == float("inf"):
            return 0.0
        snr = 10 ** (snr_db / 10)
        if self.charge_guard_loss:
            snr *= self.config.payload_fraction
        return 1.0 / snr

    def to_dict(self):
        d = asdict(self)
        d["snr_grid"] = list(self.snr_grid)
        d["config"] = asdict(self.config)
        d["K"] = self.config.K
        d["payload_fraction"] = self.config.payload_fraction
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        cfg = d.pop("config")
        d.pop("K", None)
        d.pop("payload_fraction", None)
        if "snr_grid" in d:
            d["snr_grid"] = tuple(d["snr_grid"])
        return cls(config=MimoOsdmConfig(**cfg), **d)


@dataclass
class BerPoint:
    """Tallies for one SNR point."""

    snr_db: float
    errors: int = 0
    bits: int = 0
    blocks: int = 0
    eq_flops: int = 0
    wall_s: float = 0.0

    @property
    def ber(self):
        return self.errors / self.bits if self.bits else float("nan")

    @property
    def ci(self):
        return wilson_interval(self.errors, self.bits)

    @property
    def flops_mean(self):
        return self.eq_flops / self.blocks if self.blocks else 0.0


@dataclass
class SimResult:
    campaign: SimCampaign
    points: list = field(default_factory=list)
    wall_s: float = 0.0

    def csv_text(self):
        buf = io.StringIO()
        buf.write(SNR_NOTE + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in self.points:
            lo, hi = p.ci
            w.writerow(
                [
                    f"{p.snr_db:g}",
                    f"{p.ber:.6e}",
                    f"{lo:.6e}",
                    f"{hi:.6e}",
                    p.bits,
                    p.errors,
                    f"{p.flops_mean:.1f}",
                ]
            )
        return buf.getvalue()

    def config_json(self):
        return json.dumps(self.campaign.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir):
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "results.csv").write_text(self.csv_text())
            (out / "config.json").write_text(self.config_json())
        except OSError as exc:
            raise OSError(f"cannot write results to {out}: {exc}") from exc
        return out


def _trial_rng(seed, snr_index, trial):
    return np.random.default_rng(np.random.SeedSequence([seed, snr_index, trial]))


def _equalize_ti(campaign, cir, x, sigma2):
    cfg = campaign.config
    freq = cir.freq_response(cfg.K)
    if campaign.equalizer == "ti_fast":
        return equalize_ti_fast(freq, cfg.M, x, sigma2)
    out = np.empty((cfg.U, cfg.K), dtype=np.complex128)
    for n in range(cfg.N):
        sl = slice(n * cfg.M, (n + 1) * cfg.M)
        h = build_pervector_channel(freq, cfg.M, n)
        out[:, sl] = equalize_ti_direct(h, x[:, sl].reshape(-1), sigma2).reshape(cfg.U, cfg.M)
    return out


def _equalize_tv(campaign, trace, x, sigma2):
    cfg = campaign.config
    if campaign.equalizer == "tv_direct_true":
        return equalize_tv_direct(truncated_channel_dense(trace, cfg), x, sigma2)
    bem = fit_bem(trace, cfg.Q)
    if campaign.equalizer == "tv_direct_bem":
        return equalize_tv_direct(truncated_channel_dense(bem, cfg), x, sigma2)
    return equalize_tv_fast(build_tv_banded_channel(bem, cfg), x, sigma2)


def _identity_channel(cfg):
    taps = np.zeros((cfg.V, cfg.U, cfg.L + 1), dtype=np.complex128)
    for u in range(min(cfg.U, cfg.V)):
        taps[u, u, 0] = 1.0
    return CirSet(taps)


def _run_block(campaign, sigma2, rng):
    """Simulate one block; returns (bit errors, bits, equalizer flops)."""
    cfg = campaign.config
    tv = campaign.equalizer.startswith("tv_")
    n_sym = cfg.K_payload if tv else cfg.K

    if campaign.channel != "tv":
        cir = gen_ti_channel(cfg, rng) if campaign.channel == "ti" else _identity_channel(cfg)
        trace = cir.as_bem().trace(cfg.K, cfg.cp_len) if tv else None
    else:
        trace = gen_tv_channel(cfg, campaign.fd_T, rng, campaign.n_sinusoids)

    bits = rng.integers(0, 2, size=(cfg.U, 2 * n_sym), dtype=np.uint8)
    d = qpsk_map(bits)
    if tv:
        d = insert_guard_vectors(d, cfg)
    s = add_cp(osdm_modulate(d, cfg.M), cfg.cp_len)
    if trace is None:
        r = apply_channel_ti(cir, s, sigma2, rng)
    else:
        r = apply_channel_tv(trace, s, sigma2, rng)
    x = osdm_demodulate(remove_cp(r, cfg.cp_len), cfg.M)

    with flops.FlopCounter() as fc:
        if tv:
            d_hat = _equalize_tv(campaign, trace, truncate_guard(x, cfg), sigma2)
        else:
            d_hat = _equalize_ti(campaign, cir, x, sigma2)
    errors = int(np.count_nonzero(qpsk_demap(d_hat) != bits))
    return errors, bits.size, fc.total


def run_ber_point(campaign, snr_db, snr_index=0):
    """Accumulate block trials at one SNR until the stopping rule fires."""
    sigma2 = campaign.sigma2(snr_db)
    point = BerPoint(snr_db=float(snr_db))
    t0 = time.perf_counter()
    while point.errors < campaign.min_errors and point.blocks < campaign.max_blocks:
        rng = _trial_rng(campaign.seed, snr_index, point.blocks)
        try:
            e, b, f = _run_block(campaign, sigma2, rng)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(
                f"equalizer failed at snr={snr_db} dB, trial {point.blocks}: {exc}"
            ) from exc
        point.errors += e
        point.bits += b
        point.eq_flops += f
        point.blocks += 1
    point.wall_s = time.perf_counter() - t0
    log.info(
        "%s snr=%g dB: ber=%.3e (%d/%d bits, %d blocks)",
        campaign.equalizer, snr_db, point.ber, point.errors, point.bits, point.blocks,
    )
    return point


def _point_task(args):
    campaign, snr_db, idx = args
    return run_ber_point(campaign, snr_db, idx)


def run_campaign(campaign, out_dir=None, n_jobs=1):
    """Run every SNR point (optionally in parallel) and optionally write CSV + JSON."""
    t0 = time.perf_counter()
    tasks = [(campaign, snr, i) for i, snr in enumerate(campaign.snr_grid)]
    if n_jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            points = list(pool.map(_point_task, tasks))
    else:
        points = [_point_task(t) for t in tasks]
    result = SimResult(campaign, points, time.perf_counter() - t0)
    if out_dir is not None:
        result.write(out_dir)
    return result


@dataclass
class BenchRow:
    kind: str
    U: int
    V: int
    M: int
    N: int
    Q: int
    K_payload: int
    fast_flops: int
    direct_flops: int
    fast_s: float
    direct_s: float

    @property
    def ratio(self):
        return self.fast_flops / self.direct_flops


def loglog_slope(x, y):
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def _bench_one(kind, U, V, M, N, Q, seed):
    rng = np.random.default_rng(seed)
    L = min(8, M * N - 1)
    cfg = MimoOsdmConfig(U=U, V=V, M=M, N=N, L=L, Q=Q if kind == "tv" else 0, sigma2=0.01)
    if kind == "ti":
        cir = gen_ti_channel(cfg, rng)
        freq = cir.freq_response(cfg.K)
        x = rng.standard_normal((V, cfg.K)) + 1j * rng.standard_normal((V, cfg.K))
        t0 = time.perf_counter()
        with flops.FlopCounter() as fast:
            equalize_ti_fast(freq, M, x, cfg.sigma2)
        t1 = time.perf_counter()
        with flops.FlopCounter() as direct:
            for n in range(N):
                sl = slice(n * M, (n + 1) * M)
                equalize_ti_direct(build_pervector_channel(freq, M, n), x[:, sl].reshape(-1), cfg.sigma2)
        t2 = time.perf_counter()
    else:
        shape = (V, U, 2 * Q + 1, L + 1)
        bem = BemCirSet(
            (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2 * (L + 1))
        )
        x = rng.standard_normal((V, cfg.K_payload)) + 1j * rng.standard_normal((V, cfg.K_payload))
        g = build_tv_banded_channel(bem, cfg)
        t0 = time.perf_counter()
        with flops.FlopCounter() as fast:
            equalize_tv_fast(g, x, cfg.sigma2)
        t1 = time.perf_counter()
        c = truncated_channel_dense(bem, cfg)
        t1b = time.perf_counter()
        with flops.FlopCounter() as direct:
            equalize_tv_direct(c, x, cfg.sigma2)
        t2 = time.perf_counter() - (t1b - t1)
    return BenchRow(kind, U, V, M, N, cfg.Q, cfg.K_payload, fast.total, direct.total, t1 - t0, t2 - t1)


DEFAULT_BENCH = (
    ("ti", 2, 3, 16, 64, 0),
    ("tv", 2, 3, 16, 16, 4),
    ("tv", 2, 3, 16, 24, 4),
    ("tv", 2, 3, 16, 40, 4),
    ("tv", 2, 3, 16, 64, 4),
)


def run_complexity_bench(grid=DEFAULT_BENCH, seed=0):
    """Measure fast vs direct equalizer flops and wall time over a config grid.

    Returns ``(rows, summary)``; ``summary`` holds the TV log-log slopes of
    flops against K_payload (when at least two TV rows share U, V, M, Q)
    and whether they meet the linear / cubic expectations.
    """
    rows = [_bench_one(*entry, seed=seed) for entry in grid]
    summary = {}
    tv = [r for r in rows if r.kind == "tv"]
    if len({(r.U, r.V, r.M, r.Q) for r in tv}) == 1 and len(tv) >= 2:
        kp = [r.K_payload for r in tv]
        fast = loglog_slope(kp, [r.fast_flops for r in tv])
        direct = loglog_slope(kp, [r.direct_flops for r in tv])
        summary = {
            "tv_fast_slope": fast,
            "tv_direct_slope": direct,
            "tv_fast_linear": abs(fast - 1.0) <= 0.15,
            "tv_direct_cubic": abs(direct - 3.0) <= 0.3,
        }
    return rows, summary
