"""Command line front end: ``mimo-osdm {ber,bench,selftest}``."""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError
from .modem import MimoOsdmConfig
from .sim import CHANNELS, EQUALIZERS, SimCampaign, run_campaign, run_complexity_bench

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("mimo_osdm")

DEFAULTS = {
    "U": 2,
    "V": 3,
    "M": 16,
    "K": 1024,
    "L": 24,
    "Q": 0,
    "cp_len": None,
    "channel": "ti",
    "fd_T": 0.0,
    "equalizer": "ti_fast",
    "snr": [0, 5, 10, 15, 20, 25, 30],
    "min_errors": 200,
    "max_blocks": 2000,
    "seed": 0,
    "n_sinusoids": 64,
    "charge_guard_loss": False,
}


def load_config_file(path):
    """Read a flat key/value file, JSON if it parses as JSON, TOML otherwise."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError:
        return json.loads(text)


def parse_snr(text):
    """``"0:30:5"`` (inclusive range) or ``"0,10,20"``."""
    if isinstance(text, (list, tuple)):
        return [float(s) for s in text]
    text = str(text)
    if ":" in text:
        start, stop, step = (float(p) for p in text.split(":"))
        return [float(v) for v in np.arange(start, stop + step / 2, step)]
    return [float(s) for s in text.split(",") if s.strip()]


def parse_mimo(text):
    try:
        u, v = text.lower().split("x")
        return int(u), int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected UxV, e.g. 2x3, got {text!r}") from None


def build_campaign(settings):
    s = dict(DEFAULTS)
    s.update(settings)
    unknown = set(s) - set(DEFAULTS) - {"N"}
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    M = int(s["M"])
    if "N" in settings:
        N = int(settings["N"])
    else:
        if int(s["K"]) % M:
            raise ConfigurationError(f"K={s['K']} is not a multiple of M={M}")
        N = int(s["K"]) // M
    cfg = MimoOsdmConfig(
        U=int(s["U"]), V=int(s["V"]), M=M, N=N, L=int(s["L"]), Q=int(s["Q"]),
        cp_len=None if s["cp_len"] is None else int(s["cp_len"]),
    )
    return SimCampaign(
        config=cfg,
        equalizer=s["equalizer"],
        channel=s["channel"],
        fd_T=float(s["fd_T"]),
        snr_grid=tuple(parse_snr(s["snr"])),
        min_errors=int(s["min_errors"]),
        max_blocks=int(s["max_blocks"]),
        seed=int(s["seed"]),
        n_sinusoids=int(s["n_sinusoids"]),
        charge_guard_loss=bool(s["charge_guard_loss"]),
    )


def _settings_from_args(args):
    settings = load_config_file(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "snr": args.snr,
        "M": args.M,
        "Q": args.Q,
        "fd_T": args.fdT,
        "equalizer": args.equalizer,
        "K": args.K,
        "L": args.L,
        "channel": args.channel,
        "min_errors": args.min_errors,
        "max_blocks": args.max_blocks,
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    if args.mimo is not None:
        settings["U"], settings["V"] = args.mimo
    if settings.get("equalizer", "").startswith("tv_") and "channel" not in settings:
        settings["channel"] = "tv"
    return settings


def cmd_ber(args):
    campaign = build_campaign(_settings_from_args(args))
    result = run_campaign(campaign, out_dir=args.out, n_jobs=args.jobs)
    sys.stdout.write(result.csv_text())
    if args.out:
        log.info("wrote %s/results.csv and config.json", args.out)
    return 0


def cmd_bench(args):
    rows, summary = run_complexity_bench(seed=args.seed or 0)
    header = ["kind", "U", "V", "M", "N", "Q", "K_payload", "fast_flops",
              "direct_flops", "ratio", "fast_s", "direct_s"]
    lines = []
    for r in rows:
        lines.append([r.kind, r.U, r.V, r.M, r.N, r.Q, r.K_payload, r.fast_flops,
                      r.direct_flops, f"{r.ratio:.3e}", f"{r.fast_s:.4f}", f"{r.direct_s:.4f}"])
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(lines)
    for k, v in summary.items():
        print(f"# {k} = {v:.3f}" if isinstance(v, float) else f"# {k} = {v}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "bench.csv").open("w", newline="") as fh:
            cw = csv.writer(fh, lineterminator="\n")
            cw.writerow(header)
            cw.writerows(lines)
        (out / "bench_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    ok = all(v for k, v in summary.items() if isinstance(v, bool))
    return 0 if ok else 1


def cmd_selftest(args):
    from .selftest import run_selftest

    return 0 if run_selftest(seed=args.seed or 0) else 1


def make_parser():
    p = argparse.ArgumentParser(prog="mimo-osdm", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML or JSON key/value file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")

    ber = sub.add_parser("ber", help="Monte Carlo BER campaign")
    common(ber)
    ber.add_argument("--snr", help="SNR grid in dB: start:stop:step or a,b,c")
    ber.add_argument("--M", type=int, help="vector length")
    ber.add_argument("--K", type=int, help="block length (symbols)")
    ber.add_argument("--L", type=int, help="channel order")
    ber.add_argument("--Q", type=int, help="guard vectors per edge / BEM order")
    ber.add_argument("--fdT", type=float, help="normalized Doppler spread")
    ber.add_argument("--mimo", type=parse_mimo, help="UxV, e.g. 2x3")
    ber.add_argument("--equalizer", choices=EQUALIZERS)
    ber.add_argument("--channel", choices=CHANNELS)
    ber.add_argument("--min-errors", type=int, dest="min_errors")
    ber.add_argument("--max-blocks", type=int, dest="max_blocks")
    ber.add_argument("--jobs", type=int, default=1, help="parallel SNR points")
    ber.set_defaults(func=cmd_ber)

    bench = sub.add_parser("bench", help="fast vs direct complexity benchmark")
    common(bench)
    bench.set_defaults(func=cmd_bench)

    st = sub.add_parser("selftest", help="quick oracle checks")
    common(st)
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"mimo-osdm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
