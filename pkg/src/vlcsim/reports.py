"""Figure rendering for the command-line reports.

Every figure is rendered with the Agg backend straight to a file next to
the delimited data it mirrors; nothing here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import BerRecord, CcdfRecord
from .channel import ChannelImpulseResponse


def _finish(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _ber_label(key) -> str:
    scheme, order, n_symbols, bias = key
    parts = [scheme]
    if order:
        parts.append(f"{order}-QAM")
    if n_symbols:
        parts.append(f"N={n_symbols}")
    if not np.isnan(bias):
        parts.append(f"{bias:g} V")
    return ", ".join(parts)


def ccdf_figure(records: list[CcdfRecord], path) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    keys = sorted({(r.scheme, r.order, r.n_symbols) for r in records})
    for key in keys:
        pts = sorted(
            (r.papr0_db, r.ccdf)
            for r in records
            if (r.scheme, r.order, r.n_symbols) == key
        )
        x = [p for p, c in pts if c > 0]
        y = [c for p, c in pts if c > 0]
        ax.semilogy(x, y, label=f"{key[0]}, {key[1]}-QAM, N={key[2]}")
    ax.set_xlabel("PAPR threshold (dB)")
    ax.set_ylabel("Pr(PAPR > threshold)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def ber_figure(records: list[BerRecord], path, x_label: str = "electrical SNR (dB)") -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    keys = sorted(
        {(r.scheme, r.order, r.n_symbols, r.bias_v) for r in records},
        key=lambda k: (k[0], k[1], k[2], 1e9 if np.isnan(k[3]) else k[3]),
    )
    for key in keys:
        pts = sorted(
            (r.snr_db, r.ber)
            for r in records
            if (r.scheme, r.order, r.n_symbols) == key[:3]
            and (np.isnan(r.bias_v) and np.isnan(key[3]) or r.bias_v == key[3])
        )
        x = [s for s, b in pts if b > 0]
        y = [b for s, b in pts if b > 0]
        if x:
            ax.semilogy(x, y, marker="o", markersize=3, label=_ber_label(key))
    ax.set_xlabel(x_label)
    ax.set_ylabel("bit error rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def cir_figure(cir: ChannelImpulseResponse, path) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    t_ns = np.arange(cir.gains.size) * cir.dt * 1e9
    ax.plot(t_ns, cir.gains, linewidth=0.8)
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("collected gain per bin")
    ax.set_title(f"impulse response, {cir.reflections} reflections")
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def efficiency_figure(rows: list[dict], path) -> None:
    """Power/bandwidth plane; one labelled marker per scheme point."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for row in rows:
        label = row["scheme"]
        if row["order"]:
            label += f" {row['order']}-QAM"
        ax.plot(row["norm_bandwidth"], row["norm_snr_db"], marker="o")
        ax.annotate(
            label,
            (row["norm_bandwidth"], row["norm_snr_db"]),
            textcoords="offset points",
            xytext=(6, 4),
            fontsize=8,
        )
    ax.set_xlabel("bandwidth per bit rate (OOK = 1)")
    ax.set_ylabel("SNR offset at target BER vs OOK (dB)")
    ax.grid(True, alpha=0.3)
    _finish(fig, path)
