"""End-to-end acceptance gate.

One test per shipped claim; each prints a single [PASS]/[FAIL] verdict
line directly to the terminal and then asserts it.  Seeds are fixed so
every run reproduces the same verdicts.
"""

import dataclasses

import numpy as np
import pytest
from scipy.signal import fftconvolve
from scipy.stats import norm

from vlcsim import (
    AcoFrameConfig,
    CodingConfig,
    ConstellationSpec,
    LinkConfig,
    RoomConfig,
    SignalFrame,
    aco_ofdm_demodulate,
    aco_ofdm_modulate,
    aco_scfde_demodulate,
    aco_scfde_modulate,
    ccdf_papr,
    conv_encode,
    default_led,
    freq_response_from_cir,
    map_bits,
    normalized_bandwidth,
    normalized_snr_at_ber,
    papr_at_ccdf,
    papr_grid_db,
    run_ber_sweep,
    simulate_impulse_response,
    total_gain,
    viterbi_decode_soft,
)
from vlcsim.cli import main as cli_main

SEED = 42
C = 299_792_458.0


def verdict(capsys, number: int, passed: bool, detail: str) -> None:
    word = "PASS" if passed else "FAIL"
    with capsys.disabled():
        print(f"\n[{word}] criterion {number}: {detail}")
    assert passed, f"criterion {number}: {detail}"


def rng_for(*entropy):
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


def two_proportion_z(e1: int, n1: int, e2: int, n2: int) -> float:
    p1, p2 = e1 / n1, e2 / n2
    pooled = (e1 + e2) / (n1 + n2)
    denom = np.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    return float((p1 - p2) / denom) if denom > 0 else 0.0


# ---------------------------------------------------------------------------
# 1. zero-clipping halves every data subcarrier


def test_clipping_halves_odd_bins(capsys):
    worst = 0.0
    for order in (4, 16, 64):
        spec = ConstellationSpec(order)
        cfg = AcoFrameConfig(n_symbols=64, cp_length=0)
        rng = rng_for(SEED, 1, order)
        bits = rng.integers(0, 2, size=(1000, 64 * spec.bits_per_symbol))
        symbols = map_bits(bits.ravel(), spec).reshape(1000, 64)
        frame = aco_ofdm_modulate(symbols, cfg)
        odd = np.arange(1, 128, 2)
        carried = np.fft.fft(frame.samples, axis=-1)[:, odd]
        err = np.abs(carried - symbols / 2.0) / np.abs(symbols / 2.0)
        worst = max(worst, float(err.max()))
    verdict(
        capsys, 1, worst < 1e-10,
        f"clipping halves the odd-bin amplitudes exactly "
        f"(worst relative error {worst:.2e} over 3000 frames)",
    )


# ---------------------------------------------------------------------------
# 2. noiseless recovery through dispersive channels inside the prefix budget


def test_dispersive_loopback_within_prefix_budget(capsys):
    cfg = AcoFrameConfig(n_symbols=64, cp_length=16)
    spec = ConstellationSpec(16)
    rng = rng_for(SEED, 2)
    worst = 0.0
    for trial in range(100):
        length = int(rng.integers(2, cfg.cp_length + 2))
        taps = np.empty(length)
        taps[0] = rng.uniform(0.8, 1.2)
        taps[1:] = rng.uniform(-0.3, 0.3, length - 1) * 0.7 ** np.arange(1, length)
        h = freq_response_from_cir(taps, cfg.fft_size)
        bits = rng.integers(0, 2, size=64 * spec.bits_per_symbol)
        symbols = map_bits(bits, spec)
        for modulate, demodulate in (
            (aco_ofdm_modulate, aco_ofdm_demodulate),
            (aco_scfde_modulate, aco_scfde_demodulate),
        ):
            frame = modulate(symbols, cfg)
            rx = fftconvolve(frame.samples, taps)[: frame.samples.shape[-1]]
            est = demodulate(SignalFrame(rx, cfg.sample_rate), h, cfg)
            worst = max(worst, float(np.abs(est - symbols).max()))
    verdict(
        capsys, 2, worst < 1e-9,
        f"noiseless loopback through 100 random channels of support <= "
        f"{cfg.cp_length + 1} recovers symbols (worst error {worst:.2e})",
    )


# ---------------------------------------------------------------------------
# 3. single-carrier frames have a lighter PAPR tail


def test_precoded_frames_cut_papr_tail(capsys):
    grid = papr_grid_db()
    trials = 100_000
    level = 1e-3
    at_tail = {}
    for scheme in ("aco-ofdm", "aco-scfde"):
        for n in (64, 256):
            for order in (4, 16, 64):
                records = ccdf_papr(scheme, order, n, trials, grid, SEED)
                at_tail[scheme, n, order] = papr_at_ccdf(records, level)
    margins = [
        at_tail["aco-ofdm", n, m] - at_tail["aco-scfde", n, m]
        for n in (64, 256)
        for m in (4, 16, 64)
    ]
    growth = [
        at_tail[s, 256, m] - at_tail[s, 64, m]
        for s in ("aco-ofdm", "aco-scfde")
        for m in (4, 16, 64)
    ]
    ok = min(margins) >= 0.2 and min(growth) > 0.0
    verdict(
        capsys, 3, ok,
        f"precoding cuts the 1e-3 PAPR tail on every grid point "
        f"(min margin {min(margins):.2f} dB) and the tail grows with block "
        f"length (min growth {min(growth):.2f} dB)",
    )


# ---------------------------------------------------------------------------
# 4. the flat ideal link matches the Gaussian error-rate law


def test_flat_link_matches_gaussian_error_rate(capsys):
    link = LinkConfig(scheme="aco-ofdm", order=4, n_symbols=64)
    grid = [2.0, 4.0, 6.0, 8.0, 10.0, 11.4]
    records = run_ber_sweep(link, grid, min_errors=100, max_bits=4_000_000,
                            seed=SEED)
    worst_pull = 0.0
    for rec in records:
        p = float(norm.sf(np.sqrt(10.0 ** (rec.snr_db / 10.0))))
        sigma = np.sqrt(p * (1.0 - p) / rec.bits)
        worst_pull = max(worst_pull, abs(rec.ber - p) / sigma)
    verdict(
        capsys, 4, worst_pull < 3.0,
        f"measured error rates sit within 3 sigma of the Gaussian tail law "
        f"at all {len(grid)} grid points (worst pull {worst_pull:.2f} sigma)",
    )


# ---------------------------------------------------------------------------
# 5. precoding wins on the traced channel behind the nonlinear front end


def test_precoding_wins_on_dispersive_led_link(capsys, link_taps):
    grid = [10.0, 12.0, 14.0, 16.0, 18.0]
    led = default_led(3.2)
    results = {}
    for stream, scheme in enumerate(("aco-ofdm", "aco-scfde")):
        link = LinkConfig(scheme=scheme, order=4, n_symbols=64,
                          led=led, channel_taps=link_taps)
        results[scheme] = run_ber_sweep(
            link, grid, min_errors=300, max_bits=3_000_000,
            seed=SEED, stream_index=stream,
        )
    window, ordered, separated = 0, True, 0
    for ofdm, scfde in zip(results["aco-ofdm"], results["aco-scfde"]):
        in_window = (1e-4 <= ofdm.ber <= 1e-1) and (1e-4 <= scfde.ber <= 1e-1)
        if not in_window:
            continue
        window += 1
        ordered = ordered and scfde.ber <= ofdm.ber
        z = two_proportion_z(ofdm.errors, ofdm.bits, scfde.errors, scfde.bits)
        if z >= 1.645:
            separated += 1
    ok = window >= 2 and ordered and separated >= 2
    verdict(
        capsys, 5, ok,
        f"single-carrier stays at or below multicarrier across the waterfall "
        f"({window} comparable points, {separated} separated at 95%)",
    )


# ---------------------------------------------------------------------------
# 6. the mid-range bias point minimizes distortion


def test_midrange_bias_minimizes_distortion(capsys, link_taps):
    biases = (3.0, 3.2, 3.5)
    ber = {}
    rec = {}
    for stream, bias in enumerate(biases):
        link = LinkConfig(scheme="aco-ofdm", order=16, n_symbols=64,
                          led=default_led(bias), channel_taps=link_taps)
        rec[bias] = run_ber_sweep(link, [18.0], min_errors=300,
                                  max_bits=3_000_000, seed=SEED,
                                  stream_index=stream)[0]
        ber[bias] = rec[bias].ber
    z_low = two_proportion_z(rec[3.0].errors, rec[3.0].bits,
                             rec[3.2].errors, rec[3.2].bits)
    z_high = two_proportion_z(rec[3.5].errors, rec[3.5].bits,
                              rec[3.2].errors, rec[3.2].bits)
    ok = (
        ber[3.2] <= ber[3.0]
        and ber[3.2] <= ber[3.5]
        and max(z_low, z_high) >= 1.645
    )
    verdict(
        capsys, 6, ok,
        f"bias 3.2 V gives the lowest 16-point error rate "
        f"(3.0 V: {ber[3.0]:.3e}, 3.2 V: {ber[3.2]:.3e}, "
        f"3.5 V: {ber[3.5]:.3e})",
    )


# ---------------------------------------------------------------------------
# 7. the rate-1/2 code corrects double errors and buys coding gain


def test_convolutional_code_corrects_and_gains(capsys):
    info = rng_for(SEED, 7).integers(0, 2, size=50).astype(np.uint8)
    coded = conv_encode(info)
    n = coded.size
    flips = [(i,) for i in range(n)]
    flips += [(i, j) for i in range(n) for j in range(i + 1, n)]
    llrs = np.tile(1.0 - 2.0 * coded.astype(np.float64), (len(flips), 1))
    for row, positions in enumerate(flips):
        for pos in positions:
            llrs[row, pos] = -llrs[row, pos]
    decoded = viterbi_decode_soft(llrs)
    corrects_all = bool(np.all(decoded == info[None, :]))

    uncoded = LinkConfig(scheme="aco-ofdm", order=4, n_symbols=64)
    coded_link = dataclasses.replace(uncoded, coding=CodingConfig())
    at_7db_plain = run_ber_sweep(uncoded, [7.0], min_errors=150,
                                 max_bits=2_000_000, seed=SEED)[0]
    at_7db_coded = run_ber_sweep(coded_link, [7.0], min_errors=150,
                                 max_bits=2_000_000, seed=SEED,
                                 stream_index=1)[0]
    ok = (
        corrects_all
        and 1e-2 <= at_7db_plain.ber <= 1e-1
        and at_7db_coded.ber < at_7db_plain.ber
    )
    verdict(
        capsys, 7, ok,
        f"all {len(flips)} single/double flips decode exactly and the coded "
        f"link beats uncoded at equal transmit power "
        f"({at_7db_coded.ber:.3e} vs {at_7db_plain.ber:.3e})",
    )


# ---------------------------------------------------------------------------
# 8. both block schemes beat the serial baseline on power at a small
#    bandwidth premium


def test_power_bandwidth_tradeoff_vs_baseline(capsys):
    aco_grid = [10.5, 11.0, 11.5, 12.0, 12.5]
    ook_grid = [13.5, 14.0, 14.5, 15.0, 15.5]
    target = 1e-4
    sweeps = {}
    for stream, (scheme, grid) in enumerate((
        ("aco-ofdm", aco_grid),
        ("aco-scfde", aco_grid),
        ("ook", ook_grid),
    )):
        link = LinkConfig(scheme=scheme, order=4, n_symbols=64)
        sweeps[scheme] = run_ber_sweep(link, grid, min_errors=200,
                                       max_bits=8_000_000, seed=SEED,
                                       stream_index=stream)
    ofdm = normalized_snr_at_ber(sweeps["aco-ofdm"], sweeps["ook"], target)
    scfde = normalized_snr_at_ber(sweeps["aco-scfde"], sweeps["ook"], target)
    bw = normalized_bandwidth("aco-ofdm", 64, 4)
    ok = (
        scfde < ofdm < 0.0
        and bw == 1.03125
        and normalized_bandwidth("ook", 64, 4) == 1.0
    )
    verdict(
        capsys, 8, ok,
        f"at BER {target} the block schemes need less power than the serial "
        f"baseline (single-carrier {scfde:+.2f} dB, multicarrier "
        f"{ofdm:+.2f} dB) for a {bw:.5f}x bandwidth factor",
    )


# ---------------------------------------------------------------------------
# 9. the traced channel matches an independent integrator


def surface_list(room: RoomConfig):
    l, w, h = room.length, room.width, room.height
    ex, ey, ez = np.eye(3)
    return [
        ((0, 0, 0), ex, l, ey, w, ez, room.rho_floor),
        ((0, 0, h), ex, l, ey, w, -ez, room.rho_ceiling),
        ((0, 0, 0), ey, w, ez, h, ex, room.rho_west),
        ((l, 0, 0), ey, w, ez, h, -ex, room.rho_east),
        ((0, 0, 0), ex, l, ez, h, ey, room.rho_south),
        ((0, w, 0), ex, l, ez, h, -ey, room.rho_north),
    ]


def integrate_single_bounce(room: RoomConfig, patch_size: float, dt: float):
    """Plain-loop first-bounce integration used as the reference."""
    s = room.source_position()
    ns = room.source_normal()
    r = room.receiver_position()
    nr = room.receiver_normal()
    mode = room.source_mode
    area = room.receiver_area_m2
    fov_floor = np.cos(np.deg2rad(room.receiver_fov_deg)) - 1e-12
    bins = {}
    for origin, u, eu, v, ev, normal, rho in surface_list(room):
        nu = max(1, int(np.ceil(eu / patch_size)))
        nv = max(1, int(np.ceil(ev / patch_size)))
        du, dv = eu / nu, ev / nv
        for i in range(nu):
            for j in range(nv):
                p = (np.asarray(origin, dtype=float)
                     + (i + 0.5) * du * u + (j + 0.5) * dv * v)
                d1 = p - s
                r1 = np.linalg.norm(d1)
                cos_e = ns @ d1 / r1
                cos_i = -(normal @ d1) / r1
                if cos_e <= 0 or cos_i <= 0:
                    continue
                d2 = r - p
                r2 = np.linalg.norm(d2)
                cos_e2 = normal @ d2 / r2
                cos_i2 = nr @ (p - r) / r2
                if cos_e2 <= 0 or cos_i2 <= 0 or cos_i2 < fov_floor:
                    continue
                g1 = ((mode + 1.0) / (2.0 * np.pi) * cos_e ** mode * cos_i
                      * du * dv / r1 ** 2)
                g2 = cos_e2 * cos_i2 * area / (np.pi * r2 ** 2)
                index = int(round((r1 + r2) / C / dt))
                bins[index] = bins.get(index, 0.0) + rho * g1 * g2
    out = np.zeros(max(bins) + 1)
    for index, value in bins.items():
        out[index] = value
    return out


def test_traced_channel_matches_independent_integrator(capsys, default_room):
    dt = 1e-9
    s = default_room.source_position()
    r = default_room.receiver_position()
    d = float(np.linalg.norm(r - s))
    cos_both = (s[2] - r[2]) / d
    los_expected = (2.0 / (2.0 * np.pi * d * d)) * cos_both * cos_both \
        * default_room.receiver_area_m2
    cir0 = simulate_impulse_response(default_room, 0, time_resolution=dt)
    los_bin = int(round(d / C / dt))
    los_ok = (
        abs(total_gain(cir0) - los_expected) / los_expected < 1e-12
        and cir0.gains[los_bin] == total_gain(cir0)
    )

    cir1 = simulate_impulse_response(default_room, 1, patch_size=0.2,
                                     time_resolution=dt)
    bounce = cir1.gains.copy()
    bounce[los_bin] -= cir0.gains[los_bin]
    reference = integrate_single_bounce(default_room, 0.2, dt)
    size = max(bounce.size, reference.size)
    bounce = np.pad(bounce, (0, size - bounce.size))
    reference = np.pad(reference, (0, size - reference.size))
    bounce_err = float(np.abs(bounce - reference).max() / reference.max())

    gains = []
    for scale in (0.25, 0.5, 0.75, 1.0):
        room = dataclasses.replace(
            default_room,
            rho_north=0.8 * scale, rho_south=0.8 * scale,
            rho_east=0.8 * scale, rho_west=0.8 * scale,
            rho_ceiling=0.8 * scale, rho_floor=0.3 * scale,
        )
        gains.append(total_gain(simulate_impulse_response(
            room, 2, patch_size=0.2, time_resolution=dt)))
    monotone = all(a < b for a, b in zip(gains, gains[1:]))

    ok = los_ok and bounce_err < 1e-9 and monotone
    verdict(
        capsys, 9, ok,
        f"line of sight matches the closed form, the first bounce matches a "
        f"plain-loop integration (relative error {bounce_err:.2e}), and "
        f"collected energy rises with reflectivity",
    )


# ---------------------------------------------------------------------------
# 10. the command line reproduces its artifacts byte for byte


CLI_CONFIGS = {
    "papr": """
seed = 11
schemes = aco-ofdm,aco-scfde
m_values = 4
n_values = 64
trials = 400
""",
    "ber": """
seed = 11
schemes = aco-ofdm,aco-scfde
m_values = 4
n_values = 64
snr_start = 6
snr_stop = 8
snr_step = 2
min_errors = 20
max_bits = 60000
frontend = ideal
channel = flat
""",
    "bias-sweep": """
seed = 11
schemes = aco-ofdm
m_values = 4
n_values = 64
snr_start = 8
snr_stop = 8
snr_step = 1
min_errors = 15
max_bits = 60000
bias_values = 3.2,3.5
frontend = led
channel = flat
""",
    "coded-vs-uncoded": """
seed = 11
schemes = aco-ofdm
m_values = 4
n_values = 64
snr_start = 6
snr_stop = 6
snr_step = 1
min_errors = 15
max_bits = 60000
frontend = ideal
channel = flat
""",
    "normalized-comparison": """
seed = 11
schemes = aco-ofdm,aco-scfde
m_values = 4
n_values = 64
snr_start = 4
snr_stop = 16
snr_step = 2
min_errors = 60
max_bits = 100000
target_ber = 0.01
frontend = ideal
channel = flat
""",
    "channel": """
seed = 11
channel = traced
reflections = 1
patch_size = 0.5
""",
}


def artifact_bytes(out_dir):
    names = sorted(p.name for p in out_dir.iterdir()
                   if p.suffix == ".csv" or p.name == "manifest.txt")
    return {name: (out_dir / name).read_bytes() for name in names}


def test_cli_outputs_are_reproducible(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("VLCSIM_CACHE", str(tmp_path / "cache"))
    monkeypatch.delenv("VLCSIM_THREADS", raising=False)
    all_ok = True
    checked = 0
    for kind, text in CLI_CONFIGS.items():
        cfg = tmp_path / f"{kind}.cfg"
        cfg.write_text(text)
        outputs = []
        for run in range(3):
            out = tmp_path / f"{kind}-{run}"
            if run == 2:
                monkeypatch.setenv("VLCSIM_THREADS", "2")
            code = cli_main([kind, "-c", str(cfg), "-o", str(out)])
            if run == 2:
                monkeypatch.delenv("VLCSIM_THREADS")
            assert code == 0, f"{kind} exited {code}"
            outputs.append(artifact_bytes(out))
        same = outputs[0] == outputs[1] == outputs[2]
        all_ok = all_ok and same and len(outputs[0]) >= 2
        checked += len(outputs[0])
    verdict(
        capsys, 10, all_ok,
        f"all {len(CLI_CONFIGS)} experiment kinds reproduce {checked} "
        f"delimited artifacts byte for byte, serial and parallel",
    )
