"""Link-level experiments: PAPR statistics, Monte Carlo BER sweeps, and
power/bandwidth efficiency summaries, plus the delimited artifact formats.

Chain conventions (shared by every sweep):
  * The modulated waveform is normalized to unit RMS against its ensemble
    power, its ensemble mean is removed, and the result drives the LED
    around the bias point.  The bias-referenced light is divided by the
    linearized front-end gain and amplified, so a distortionless device
    yields the drive waveform exactly at the configured signal power.
  * SNR is that configured signal power over the fixed noise power: the
    receiver SNR of the linear reference link.  Nonlinearity shows up
    purely as a departure from that reference.
  * Channel taps are normalized to unit DC gain, so the absolute optical
    path loss is folded into the swept SNR axis.
Per-point RNG streams derive from (seed, stream index, point index, batch
index), which makes every record independent of worker scheduling.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .coding import TAIL_BITS, conv_encode, deinterleave, interleave, viterbi_decode_soft
from .constellation import ConstellationSpec, demap_hard, demap_soft, map_bits
from .led import LedModel
from .modem import (
    AcoFrameConfig,
    SignalFrame,
    aco_ofdm_demodulate,
    aco_ofdm_modulate,
    aco_scfde_demodulate,
    aco_scfde_modulate,
    freq_response_from_cir,
)
from .ook import mmse_design, ook_demodulate

ACO_SCHEMES = ("aco-ofdm", "aco-scfde")
SCHEMES = ACO_SCHEMES + ("ook",)
DEFAULT_NOISE_DBM = -10.0

_ACO_BATCH_FRAMES = 256
_OOK_BATCH_ROWS = 4
_CODED_BATCH_BLOCKS = 16
_CCDF_BATCH_FRAMES = 4096
_DRIVE_STAT_FRAMES = 512
_DRIVE_STAT_SALT = 2857443411


def noise_variance_from_dbm(noise_power_dbm: float) -> float:
    """Electrical noise power in watts for a unit-resistance convention."""
    return 10.0 ** ((noise_power_dbm - 30.0) / 10.0)


# ---------------------------------------------------------------------------
# PAPR


def papr(frame: SignalFrame) -> float | np.ndarray:
    """Peak-to-average power ratio (linear); per row for a batch frame."""
    x = frame.samples
    power = x * x
    mean = power.mean(axis=-1)
    if np.any(mean == 0):
        raise ValueError("PAPR undefined for an all-zero frame")
    ratio = power.max(axis=-1) / mean
    return float(ratio) if np.isscalar(ratio) or ratio.ndim == 0 else ratio


def papr_grid_db(start: float = 2.0, stop: float = 20.0, step: float = 0.05) -> np.ndarray:
    """Fixed dB threshold grid for CCDF accumulation."""
    n = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(n), 9)


@dataclass
class CcdfRecord:
    scheme: str
    order: int
    n_symbols: int
    papr0_db: float
    ccdf: float
    trials: int
    seed: int


def ccdf_papr(
    scheme: str,
    order: int,
    n_symbols: int,
    trials: int,
    grid_db: np.ndarray,
    seed: int,
    stream_index: int = 0,
) -> list[CcdfRecord]:
    """Empirical Pr(PAPR > threshold) over freshly modulated frames.

    PAPR is measured on the clipped 4N-sample frame without cyclic prefix.
    """
    if scheme not in ACO_SCHEMES:
        raise ValueError(f"PAPR curves cover {ACO_SCHEMES}, got {scheme!r}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    spec = ConstellationSpec(order)
    cfg = AcoFrameConfig(n_symbols, cp_length=0)
    modulate = aco_ofdm_modulate if scheme == "aco-ofdm" else aco_scfde_modulate
    grid_db = np.asarray(grid_db, dtype=np.float64)
    counts = np.zeros(grid_db.size, dtype=np.int64)
    done = 0
    batch = 0
    while done < trials:
        nf = min(_CCDF_BATCH_FRAMES, trials - done)
        rng = np.random.default_rng(np.random.SeedSequence([seed, stream_index, batch]))
        bits = rng.integers(0, 2, size=(nf, n_symbols * spec.bits_per_symbol))
        symbols = map_bits(bits.ravel(), spec).reshape(nf, n_symbols)
        values_db = 10.0 * np.log10(papr(modulate(symbols, cfg)))
        counts += (values_db[:, None] > grid_db[None, :]).sum(axis=0)
        done += nf
        batch += 1
    return [
        CcdfRecord(scheme, order, n_symbols, float(p0), c / trials, trials, seed)
        for p0, c in zip(grid_db, counts)
    ]


def papr_at_ccdf(records: list[CcdfRecord], level: float) -> float:
    """Threshold where the CCDF crosses `level` (log-linear interpolation)."""
    pts = sorted((r.papr0_db, r.ccdf) for r in records)
    for (x0, c0), (x1, c1) in zip(pts, pts[1:]):
        if c0 >= level >= c1 and c0 > 0 and c1 > 0 and c0 != c1:
            t = (np.log10(level) - np.log10(c0)) / (np.log10(c1) - np.log10(c0))
            return float(x0 + t * (x1 - x0))
    raise ValueError(f"CCDF level {level} is not bracketed by the records")


# ---------------------------------------------------------------------------
# Link configuration


@dataclass
class CodingConfig:
    interleaver_rows: int = 32
    frames_per_block: int = 4

    def __post_init__(self) -> None:
        if self.interleaver_rows < 2:
            raise ValueError("interleaver_rows must be at least 2")
        if self.frames_per_block < 1:
            raise ValueError("frames_per_block must be at least 1")


@dataclass
class LinkConfig:
    """One point of the scheme/constellation/front-end/channel grid."""

    scheme: str
    order: int = 4
    n_symbols: int = 64
    cp_length: int = 16
    sample_rate: float = 1e8
    led: LedModel | None = None  # None: distortionless front-end
    channel_taps: np.ndarray | None = None  # None: flat channel
    noise_power_dbm: float = DEFAULT_NOISE_DBM
    ook_taps: int = 31
    ook_block_bits: int = 8192
    coding: CodingConfig | None = None

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r} (expected {SCHEMES})")
        if self.channel_taps is not None:
            taps = np.asarray(self.channel_taps, dtype=np.float64).ravel()
            total = taps.sum()
            if taps.size == 0 or total <= 0:
                raise ValueError("channel taps must carry positive total gain")
            self.channel_taps = taps / total
        if self.scheme in ACO_SCHEMES:
            support = 1 if self.channel_taps is None else self.channel_taps.size
            if support > self.cp_length + 1:
                raise ValueError(
                    f"channel support of {support} taps exceeds the cyclic "
                    f"prefix budget cp_length+1 = {self.cp_length + 1}"
                )
        if self.coding is not None and self.scheme not in ACO_SCHEMES:
            raise ValueError("coded transmission applies to the ACO schemes only")
        if self.ook_taps < 1:
            raise ValueError("ook_taps must be at least 1")
        if self.ook_block_bits < 1:
            raise ValueError("ook_block_bits must be at least 1")

    @property
    def record_scheme(self) -> str:
        return self.scheme + "+bicm" if self.coding is not None else self.scheme


def link_taps_from_cir(cir, sample_rate: float) -> np.ndarray:
    """Re-bin a ray-traced response to the frame sample grid."""
    from .channel import resample_cir

    return resample_cir(cir, 1.0 / sample_rate).gains


@dataclass
class BerRecord:
    scheme: str
    order: int
    n_symbols: int
    bias_v: float
    snr_db: float
    bits: int
    errors: int
    ber: float
    seed: int


# ---------------------------------------------------------------------------
# Monte Carlo BER


@lru_cache(maxsize=32)
def _drive_mean(scheme: str, order: int, n_symbols: int, cp_length: int) -> float:
    """Ensemble mean of the unit-RMS clipped waveform, fixed internal stream."""
    spec = ConstellationSpec(order)
    cfg = AcoFrameConfig(n_symbols, cp_length=cp_length)
    modulate = aco_ofdm_modulate if scheme == "aco-ofdm" else aco_scfde_modulate
    rng = np.random.default_rng(
        np.random.SeedSequence(
            [_DRIVE_STAT_SALT, ACO_SCHEMES.index(scheme), order, n_symbols, cp_length]
        )
    )
    bits = rng.integers(0, 2, size=(_DRIVE_STAT_FRAMES, n_symbols * spec.bits_per_symbol))
    symbols = map_bits(bits.ravel(), spec).reshape(_DRIVE_STAT_FRAMES, n_symbols)
    samples = modulate(symbols, cfg).samples
    return float(samples.mean() / np.sqrt(_scheme_unit_power(scheme, n_symbols)))


def _scheme_unit_power(scheme: str, n_symbols: int) -> float:
    """Ensemble per-sample power of the clipped frame at unit symbol energy."""
    if scheme == "aco-ofdm":
        return 1.0 / (16.0 * n_symbols)
    if scheme == "aco-scfde":
        return 1.0 / 16.0
    raise ValueError(scheme)


class _LinkContext:
    """Pre-resolved constants shared by every point of one sweep."""

    def __init__(self, link: LinkConfig):
        self.link = link
        self.led = link.led if link.led is not None else LedModel.identity()
        self.slope = self.led.small_signal_slope()
        if not self.slope > 0:
            raise ValueError("LED small-signal slope at the bias point is not positive")
        self.phi_bias = float(self.led.output(np.array([self.led.v_bias]))[0])
        self.taps = (
            np.array([1.0]) if link.channel_taps is None else link.channel_taps
        )
        self.noise_std = float(np.sqrt(noise_variance_from_dbm(link.noise_power_dbm)))
        if link.scheme in ACO_SCHEMES:
            self.spec = ConstellationSpec(link.order)
            self.cfg = AcoFrameConfig(
                link.n_symbols, cp_length=link.cp_length, sample_rate=link.sample_rate
            )
            self.freq = freq_response_from_cir(self.taps, self.cfg.fft_size)
            odd = np.arange(1, 2 * link.n_symbols, 2)
            self.inv_h2 = 1.0 / np.abs(self.freq[odd]) ** 2
            self.unit_power = _scheme_unit_power(link.scheme, link.n_symbols)
            self.mean_drive = _drive_mean(
                link.scheme, link.order, link.n_symbols, link.cp_length
            )
            self.modulate = (
                aco_ofdm_modulate if link.scheme == "aco-ofdm" else aco_scfde_modulate
            )
            self.demodulate = (
                aco_ofdm_demodulate if link.scheme == "aco-ofdm" else aco_scfde_demodulate
            )
            if link.coding is not None:
                k = self.spec.bits_per_symbol
                coded_len = link.coding.frames_per_block * link.n_symbols * k
                if coded_len % 2 or coded_len // 2 - TAIL_BITS < 1:
                    raise ValueError("coded block does not fit the frame grid")
                if coded_len % link.coding.interleaver_rows:
                    raise ValueError(
                        f"coded block of {coded_len} bits does not fill the "
                        f"{link.coding.interleaver_rows}-row interleaver"
                    )
                self.coded_len = coded_len
                self.info_len = coded_len // 2 - TAIL_BITS
                self.rate = self.info_len / coded_len
        else:
            self.amplitude = float(np.sqrt(2.0))  # unit mean electrical power

    def signal_power(self, snr_db: float) -> float:
        return noise_variance_from_dbm(self.link.noise_power_dbm) * 10.0 ** (
            snr_db / 10.0
        )

    def front_end(self, unit_rms: np.ndarray, mean_drive: float, power: float):
        """Drive the LED and amplify; returns (tx waveform, calibration).

        The bias-referenced light is divided by the linearized front-end
        gain (small-signal slope times drive scale), so a distortionless
        device reproduces the drive exactly and the SNR axis is anchored
        to the linear reference link at every bias point.
        """
        drive = unit_rms - mean_drive
        phi = self.led.output(self.led.v_bias + self.led.drive_scale * drive)
        linear_gain = self.slope * self.led.drive_scale
        tx = np.sqrt(power) * (phi - self.phi_bias) / linear_gain
        calibration = np.sqrt(power)
        return tx, calibration


def _aco_batch(
    ctx: _LinkContext, power: float, rng: np.random.Generator
) -> tuple[int, int]:
    link = ctx.link
    n = link.n_symbols
    k = ctx.spec.bits_per_symbol
    bits = rng.integers(0, 2, size=(_ACO_BATCH_FRAMES, n * k), dtype=np.uint8)
    symbols = map_bits(bits.ravel(), ctx.spec).reshape(-1, n)
    clipped = ctx.modulate(symbols, ctx.cfg).samples
    unit = clipped / np.sqrt(ctx.unit_power)
    tx, cal = ctx.front_end(unit, ctx.mean_drive, power)
    frame_len = ctx.cfg.fft_size + ctx.cfg.cp_length
    rx = fftconvolve(tx, ctx.taps[None, :], axes=1)[:, :frame_len]
    rx = rx + rng.normal(0.0, ctx.noise_std, size=rx.shape)
    scaled = rx * (np.sqrt(ctx.unit_power) / cal)
    estimates = ctx.demodulate(
        SignalFrame(scaled, link.sample_rate), ctx.freq, ctx.cfg
    )
    decided = demap_hard(estimates.ravel(), ctx.spec)
    return int(np.count_nonzero(decided != bits.ravel())), bits.size


def _coded_batch(
    ctx: _LinkContext, power: float, rng: np.random.Generator
) -> tuple[int, int]:
    link = ctx.link
    coding = link.coding
    assert coding is not None
    n = link.n_symbols
    k = ctx.spec.bits_per_symbol
    rows = coding.interleaver_rows
    cols = ctx.coded_len // rows
    info = rng.integers(0, 2, size=(_CODED_BATCH_BLOCKS, ctx.info_len), dtype=np.uint8)
    coded = np.stack([interleave(conv_encode(row), rows, cols) for row in info])
    symbols = map_bits(coded.ravel(), ctx.spec).reshape(-1, n)
    clipped = ctx.modulate(symbols, ctx.cfg).samples
    unit = clipped / np.sqrt(ctx.unit_power)
    # matched information-bit energy: scale power by the exact code rate
    eff_power = power * ctx.rate
    tx, cal = ctx.front_end(unit, ctx.mean_drive, eff_power)
    frame_len = ctx.cfg.fft_size + ctx.cfg.cp_length
    rx = fftconvolve(tx, ctx.taps[None, :], axes=1)[:, :frame_len]
    rx = rx + rng.normal(0.0, ctx.noise_std, size=rx.shape)
    scaled = rx * (np.sqrt(ctx.unit_power) / cal)
    estimates = ctx.demodulate(
        SignalFrame(scaled, link.sample_rate), ctx.freq, ctx.cfg
    )
    sigma_u2 = (ctx.noise_std * np.sqrt(ctx.unit_power) / cal) ** 2
    bin_var = 4.0 * ctx.cfg.fft_size * sigma_u2 * ctx.inv_h2
    raw = demap_soft(estimates.ravel(), ctx.spec, 1.0).reshape(-1, k)
    if link.scheme == "aco-ofdm":
        # each frequency bin keeps its own equalized-noise variance
        per_symbol = np.tile(bin_var, raw.shape[0] // n)
    else:
        # the receive IDFT spreads the bin noises evenly over the block
        per_symbol = np.full(raw.shape[0], bin_var.mean() / n)
    llrs = (raw / per_symbol[:, None]).reshape(_CODED_BATCH_BLOCKS, ctx.coded_len)
    llrs = np.stack([deinterleave(row, rows, cols) for row in llrs])
    decoded = viterbi_decode_soft(llrs)
    return int(np.count_nonzero(decoded != info)), info.size


def _ook_point_equalizer(ctx: _LinkContext, power: float):
    a = ctx.amplitude
    cal = np.sqrt(power)
    nv = (ctx.noise_std / cal) ** 2 / (a * a / 4.0)
    return mmse_design(ctx.taps, nv, ctx.link.ook_taps)


def _ook_batch(
    ctx: _LinkContext, power: float, rng: np.random.Generator
) -> tuple[int, int]:
    link = ctx.link
    n_bits = link.ook_block_bits
    a = ctx.amplitude
    bits = rng.integers(0, 2, size=(_OOK_BATCH_ROWS, n_bits), dtype=np.uint8)
    unit = bits.astype(np.float64) * a
    tx, cal = ctx.front_end(unit, a / 2.0, power)
    rx = fftconvolve(tx, ctx.taps[None, :], axes=1)
    rx = rx + rng.normal(0.0, ctx.noise_std, size=rx.shape)
    restored = rx / cal + a / 2.0
    decided = ook_demodulate(
        SignalFrame(restored, link.sample_rate), ctx.point_equalizer, a, n_bits=n_bits
    )
    return int(np.count_nonzero(decided != bits)), bits.size


def _simulate_point(
    ctx: _LinkContext,
    snr_db: float,
    min_errors: int,
    max_bits: int,
    seed: int,
    stream_index: int,
    point_index: int,
) -> BerRecord:
    power = ctx.signal_power(snr_db)
    if ctx.link.scheme in ACO_SCHEMES:
        batch = _coded_batch if ctx.link.coding is not None else _aco_batch
    else:
        batch = _ook_batch
        ctx.point_equalizer = _ook_point_equalizer(ctx, power)
    errors = 0
    bits = 0
    index = 0
    while errors < min_errors and bits < max_bits:
        rng = np.random.default_rng(
            np.random.SeedSequence([seed, stream_index, point_index, index])
        )
        e, b = batch(ctx, power, rng)
        errors += e
        bits += b
        index += 1
    link = ctx.link
    return BerRecord(
        scheme=link.record_scheme,
        order=link.order if link.scheme in ACO_SCHEMES else 0,
        n_symbols=link.n_symbols if link.scheme in ACO_SCHEMES else 0,
        bias_v=float(link.led.v_bias) if link.led is not None else float("nan"),
        snr_db=float(snr_db),
        bits=bits,
        errors=errors,
        ber=errors / bits,
        seed=seed,
    )


def run_ber_sweep(
    link: LinkConfig,
    snr_grid_db,
    min_errors: int = 100,
    max_bits: int = 5_000_000,
    seed: int = 0,
    stream_index: int = 0,
) -> list[BerRecord]:
    """Monte Carlo BER over an SNR grid; stops each point at min_errors
    accumulated errors or max_bits simulated bits, whichever comes first."""
    if min_errors < 1 or max_bits < 1:
        raise ValueError("min_errors and max_bits must be positive")
    ctx = _LinkContext(link)
    return [
        _simulate_point(ctx, float(snr), min_errors, max_bits, seed, stream_index, i)
        for i, snr in enumerate(snr_grid_db)
    ]


# ---------------------------------------------------------------------------
# Efficiency summaries


def normalized_bandwidth(scheme: str, n_symbols: int, order: int) -> float:
    """First-null bandwidth per bit rate, referenced to NRZ OOK."""
    if scheme == "ook":
        return 1.0
    if scheme in ACO_SCHEMES:
        if order < 2:
            raise ValueError("constellation order must be at least 2")
        return float(2.0 * (1.0 + 2.0 / n_symbols) / np.log2(order))
    raise ValueError(f"unknown scheme {scheme!r}")


def snr_at_ber(records: list[BerRecord], target_ber: float) -> float:
    """SNR in dB where the record curve crosses target_ber.

    Log-linear interpolation between the first bracketing pair of grid
    points; a target outside the simulated range is a hard error.
    """
    if not 0.0 < target_ber < 1.0:
        raise ValueError("target_ber must lie in (0, 1)")
    pts = sorted((r.snr_db, r.ber) for r in records)
    if len(pts) < 2:
        raise ValueError("need at least two records to interpolate")
    for (x0, b0), (x1, b1) in zip(pts, pts[1:]):
        if b0 >= target_ber >= b1 and b0 > 0 and b1 > 0:
            if b0 == b1:
                return float(x0)
            t = (np.log10(target_ber) - np.log10(b0)) / (np.log10(b1) - np.log10(b0))
            return float(x0 + t * (x1 - x0))
    raise ValueError(
        f"target BER {target_ber} is not bracketed by the simulated range"
    )


def normalized_snr_at_ber(
    records: list[BerRecord], ook_records: list[BerRecord], target_ber: float
) -> float:
    """SNR offset in dB at the target BER, referenced to the OOK curve."""
    return snr_at_ber(records, target_ber) - snr_at_ber(ook_records, target_ber)


# ---------------------------------------------------------------------------
# Delimited artifacts

BER_HEADER = "scheme,M,N,bias_v,snr_db,bits,errors,ber,seed"
CCDF_HEADER = "scheme,M,N,papr0_db,ccdf,trials,seed"


def _fmt(value: float) -> str:
    return repr(float(value))


def atomic_write_text(path, text: str) -> None:
    """Write-then-rename so readers never observe a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_ber_csv(path, records: list[BerRecord]) -> None:
    lines = [BER_HEADER]
    for r in records:
        lines.append(
            f"{r.scheme},{r.order},{r.n_symbols},{_fmt(r.bias_v)},{_fmt(r.snr_db)},"
            f"{r.bits},{r.errors},{_fmt(r.ber)},{r.seed}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_ber_csv(path) -> list[BerRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != BER_HEADER:
        raise ValueError(f"{path}: missing BER header")
    out = []
    for line in lines[1:]:
        if not line:
            continue
        s, m, n, bias, snr, bits, errors, ber, seed = line.split(",")
        out.append(
            BerRecord(s, int(m), int(n), float(bias), float(snr), int(bits),
                      int(errors), float(ber), int(seed))
        )
    return out


def write_ccdf_csv(path, records: list[CcdfRecord]) -> None:
    lines = [CCDF_HEADER]
    for r in records:
        lines.append(
            f"{r.scheme},{r.order},{r.n_symbols},{_fmt(r.papr0_db)},{_fmt(r.ccdf)},"
            f"{r.trials},{r.seed}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_ccdf_csv(path) -> list[CcdfRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CCDF_HEADER:
        raise ValueError(f"{path}: missing CCDF header")
    out = []
    for line in lines[1:]:
        if not line:
            continue
        s, m, n, p0, c, trials, seed = line.split(",")
        out.append(CcdfRecord(s, int(m), int(n), float(p0), float(c), int(trials), int(seed)))
    return out
