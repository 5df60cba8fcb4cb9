"""Command-line front end.

Each subcommand runs one experiment kind, writes delimited records plus
rendered figures into the output directory, and finishes with a
manifest.txt echoing the fully resolved configuration.  Exit codes:
0 success, 2 invalid configuration or arguments, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import reports
from .analysis import (
    ACO_SCHEMES,
    BerRecord,
    CodingConfig,
    LinkConfig,
    atomic_write_text,
    ccdf_papr,
    link_taps_from_cir,
    normalized_bandwidth,
    papr_grid_db,
    run_ber_sweep,
    snr_at_ber,
    write_ber_csv,
    write_ccdf_csv,
)
from .channel import (
    RoomConfig,
    cached_impulse_response,
    resample_cir,
    total_gain,
)
from .config import (
    KINDS,
    ConfigError,
    ExperimentConfig,
    config_lines,
    load_config,
    reference_text,
)
from .led import default_led

NORMALIZED_HEADER = "scheme,M,N,norm_snr_db,norm_bandwidth,target_ber,seed"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlcsim",
        description="link-level optical OFDM/SCFDE/OOK experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("-c", "--config", help="key=value configuration file")
        p.add_argument("--seed", type=int, help="override the base RNG seed")
        p.add_argument(
            "-o", "--out", default="vlcsim-out", help="output directory (created)"
        )
    w = sub.add_parser("write-config", help="emit a reference configuration file")
    w.add_argument("path", help="file to write")
    w.add_argument("--kind", default="ber", choices=KINDS)
    w.add_argument("--seed", type=int, default=0)
    return parser


def _resolve_config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = load_config(args.config, kind=args.command, seed=args.seed)
    else:
        if args.seed is None:
            raise ConfigError("missing required key 'seed' (no --config, no --seed)")
        cfg = ExperimentConfig(kind=args.command, seed=args.seed)
        cfg.validate()
    _check_kind_semantics(cfg)
    return cfg


def _check_kind_semantics(cfg: ExperimentConfig) -> None:
    if cfg.kind in ("papr", "coded-vs-uncoded", "bias-sweep", "normalized-comparison"):
        for s in cfg.schemes:
            if s not in ACO_SCHEMES:
                raise ConfigError(
                    f"schemes: the {cfg.kind} experiment covers {ACO_SCHEMES}, got {s!r}"
                )
    if cfg.kind == "bias-sweep" and cfg.frontend != "led":
        raise ConfigError("frontend: the bias-sweep experiment requires frontend = led")


def _worker_count(n_jobs: int) -> int:
    env = os.environ.get("VLCSIM_THREADS")
    if env is not None:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigError(f"VLCSIM_THREADS: expected an integer, got {env!r}")
        if cap < 1:
            raise ConfigError("VLCSIM_THREADS: must be at least 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(n_jobs, cap))


def _ber_task(payload) -> list[BerRecord]:
    link, grid, min_errors, max_bits, seed, stream_index = payload
    return run_ber_sweep(
        link, grid, min_errors=min_errors, max_bits=max_bits,
        seed=seed, stream_index=stream_index,
    )


def _papr_task(payload):
    scheme, order, n_symbols, trials, grid, seed, stream_index = payload
    return ccdf_papr(scheme, order, n_symbols, trials, grid, seed, stream_index)


def _run_tasks(task, payloads: list) -> list:
    workers = _worker_count(len(payloads))
    if workers <= 1:
        return [task(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, payloads))


def _cache_dir():
    env = os.environ.get("VLCSIM_CACHE")
    return Path(env) if env else None


def _traced_cir(cfg: ExperimentConfig):
    return cached_impulse_response(
        RoomConfig(),
        cfg.reflections,
        patch_size=cfg.patch_size,
        time_resolution=cfg.time_resolution,
        cache_dir=_cache_dir(),
    )


def _link_taps(cfg: ExperimentConfig):
    if cfg.channel == "flat":
        return None
    return link_taps_from_cir(_traced_cir(cfg), cfg.sample_rate)


def _frontend(cfg: ExperimentConfig, v_bias: float | None = None):
    if cfg.frontend == "ideal":
        return None
    scale = cfg.drive_scale if cfg.drive_scale > 0 else None
    return default_led(v_bias=cfg.v_bias if v_bias is None else v_bias, drive_scale=scale)


def _link(cfg: ExperimentConfig, scheme: str, order: int, n_symbols: int,
          taps, led, coding=None) -> LinkConfig:
    return LinkConfig(
        scheme=scheme,
        order=order,
        n_symbols=n_symbols,
        cp_length=cfg.cp_length,
        sample_rate=cfg.sample_rate,
        led=led,
        channel_taps=taps,
        noise_power_dbm=cfg.noise_dbm,
        coding=coding,
    )


def _write_manifest(out: Path, cfg: ExperimentConfig, artifacts: list[str]) -> None:
    lines = [f"command = {cfg.kind}"]
    lines.extend(config_lines(cfg))
    lines.append("artifacts = " + ",".join(artifacts))
    atomic_write_text(out / "manifest.txt", "\n".join(lines) + "\n")


def _run_papr(cfg: ExperimentConfig, out: Path) -> list[str]:
    grid = papr_grid_db()
    payloads = [
        (scheme, m, n, cfg.trials, grid, cfg.seed, idx)
        for idx, (scheme, m, n) in enumerate(
            (s, m, n)
            for s in cfg.schemes
            for m in cfg.m_values
            for n in cfg.n_values
        )
    ]
    results = _run_tasks(_papr_task, payloads)
    records = [r for chunk in results for r in chunk]
    write_ccdf_csv(out / "papr_ccdf.csv", records)
    reports.ccdf_figure(records, out / "papr_ccdf.png")
    return ["papr_ccdf.csv", "papr_ccdf.png"]


def _ber_payloads(cfg: ExperimentConfig, combos: list[tuple]) -> list:
    grid = cfg.snr_grid()
    return [
        (link, grid, cfg.min_errors, cfg.max_bits, cfg.seed, idx)
        for idx, link in enumerate(combos)
    ]


def _run_ber(cfg: ExperimentConfig, out: Path) -> list[str]:
    taps = _link_taps(cfg)
    led = _frontend(cfg)
    combos = []
    for scheme in cfg.schemes:
        if scheme == "ook":
            combos.append(_link(cfg, scheme, 4, 64, taps, led))
        else:
            for m in cfg.m_values:
                for n in cfg.n_values:
                    combos.append(_link(cfg, scheme, m, n, taps, led))
    results = _run_tasks(_ber_task, _ber_payloads(cfg, combos))
    records = [r for chunk in results for r in chunk]
    write_ber_csv(out / "ber.csv", records)
    reports.ber_figure(records, out / "ber.png")
    return ["ber.csv", "ber.png"]


def _run_bias_sweep(cfg: ExperimentConfig, out: Path) -> list[str]:
    taps = _link_taps(cfg)
    combos = []
    for scheme in cfg.schemes:
        for m in cfg.m_values:
            for n in cfg.n_values:
                for bias in cfg.bias_values:
                    combos.append(_link(cfg, scheme, m, n, taps, _frontend(cfg, bias)))
    results = _run_tasks(_ber_task, _ber_payloads(cfg, combos))
    records = [r for chunk in results for r in chunk]
    write_ber_csv(out / "bias_sweep.csv", records)
    reports.ber_figure(records, out / "bias_sweep.png")
    return ["bias_sweep.csv", "bias_sweep.png"]


def _run_coded(cfg: ExperimentConfig, out: Path) -> list[str]:
    taps = _link_taps(cfg)
    led = _frontend(cfg)
    coding = CodingConfig(cfg.interleaver_rows, cfg.frames_per_block)
    combos = []
    for scheme in cfg.schemes:
        for m in cfg.m_values:
            for n in cfg.n_values:
                combos.append(_link(cfg, scheme, m, n, taps, led))
                combos.append(_link(cfg, scheme, m, n, taps, led, coding=coding))
    results = _run_tasks(_ber_task, _ber_payloads(cfg, combos))
    records = [r for chunk in results for r in chunk]
    write_ber_csv(out / "coded_vs_uncoded.csv", records)
    reports.ber_figure(records, out / "coded_vs_uncoded.png")
    return ["coded_vs_uncoded.csv", "coded_vs_uncoded.png"]


def _run_normalized(cfg: ExperimentConfig, out: Path) -> list[str]:
    taps = _link_taps(cfg)
    led = _frontend(cfg)
    combos = [_link(cfg, "ook", 4, 64, taps, led)]
    keys = [("ook", 0, 0)]
    for scheme in cfg.schemes:
        for m in cfg.m_values:
            for n in cfg.n_values:
                combos.append(_link(cfg, scheme, m, n, taps, led))
                keys.append((scheme, m, n))
    results = _run_tasks(_ber_task, _ber_payloads(cfg, combos))
    records = [r for chunk in results for r in chunk]
    write_ber_csv(out / "ber.csv", records)
    reports.ber_figure(records, out / "ber.png")

    ook_snr = snr_at_ber(results[0], cfg.target_ber)
    rows = [
        {"scheme": "ook", "order": 0, "n_symbols": 0,
         "norm_snr_db": 0.0, "norm_bandwidth": 1.0}
    ]
    for key, chunk in zip(keys[1:], results[1:]):
        scheme, m, n = key
        rows.append(
            {
                "scheme": scheme,
                "order": m,
                "n_symbols": n,
                "norm_snr_db": snr_at_ber(chunk, cfg.target_ber) - ook_snr,
                "norm_bandwidth": normalized_bandwidth(scheme, n, m),
            }
        )
    lines = [NORMALIZED_HEADER]
    for row in rows:
        lines.append(
            f"{row['scheme']},{row['order']},{row['n_symbols']},"
            f"{row['norm_snr_db']!r},{row['norm_bandwidth']!r},"
            f"{cfg.target_ber!r},{cfg.seed}"
        )
    atomic_write_text(out / "normalized.csv", "\n".join(lines) + "\n")
    reports.efficiency_figure(rows, out / "efficiency.png")
    return ["ber.csv", "ber.png", "normalized.csv", "efficiency.png"]


def _run_channel(cfg: ExperimentConfig, out: Path) -> list[str]:
    cir = _traced_cir(cfg)
    lines = ["index,delay_s,gain"]
    for i, g in enumerate(cir.gains):
        lines.append(f"{i},{i * cir.dt!r},{float(g)!r}")
    atomic_write_text(out / "cir.csv", "\n".join(lines) + "\n")
    reports.cir_figure(cir, out / "cir.png")

    link = resample_cir(cir, 1.0 / cfg.sample_rate)
    lines = ["index,delay_s,gain"]
    for i, g in enumerate(link.gains):
        lines.append(f"{i},{i * link.dt!r},{float(g)!r}")
    atomic_write_text(out / "link_taps.csv", "\n".join(lines) + "\n")

    print(f"total gain: {total_gain(cir)!r}")
    print(f"bins: {cir.gains.size} at {cir.dt!r} s, link taps: {link.gains.size}")
    return ["cir.csv", "cir.png", "link_taps.csv"]


_RUNNERS = {
    "papr": _run_papr,
    "ber": _run_ber,
    "bias-sweep": _run_bias_sweep,
    "coded-vs-uncoded": _run_coded,
    "normalized-comparison": _run_normalized,
    "channel": _run_channel,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "write-config":
        try:
            text = reference_text(kind=args.kind, seed=args.seed)
            atomic_write_text(Path(args.path), text)
        except (OSError, ConfigError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3
        print(f"wrote {args.path}")
        return 0

    try:
        cfg = _resolve_config(args)
        _worker_count(1)  # surface a malformed VLCSIM_THREADS before running
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        artifacts = _RUNNERS[cfg.kind](cfg, out)
        _write_manifest(out, cfg, artifacts + ["manifest.txt"])
    except Exception as exc:  # runtime failure: report and signal exit code 3
        name = "" if isinstance(exc, (ValueError, OSError)) else type(exc).__name__ + ": "
        print(f"error: {name}{exc}", file=sys.stderr)
        return 3
    for name in artifacts + ["manifest.txt"]:
        print(out / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
