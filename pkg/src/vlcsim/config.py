"""Experiment configuration: a flat key=value text format with strict
validation, plus the reference file the command line can emit.

Format rules: one `key = value` pair per line, `#` starts a comment,
blank lines are ignored, list values are comma separated.  Unknown keys,
duplicate keys and malformed values are hard errors that name the line.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .analysis import ACO_SCHEMES, SCHEMES
from .constellation import SUPPORTED_ORDERS

KINDS = (
    "papr",
    "ber",
    "bias-sweep",
    "coded-vs-uncoded",
    "normalized-comparison",
    "channel",
)

FRONTENDS = ("ideal", "led")
CHANNELS = ("flat", "traced")


class ConfigError(ValueError):
    """Raised for malformed or semantically invalid configuration input."""


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    schemes: tuple[str, ...] = ("aco-ofdm", "aco-scfde")
    m_values: tuple[int, ...] = (4,)
    n_values: tuple[int, ...] = (64,)
    snr_start: float = 0.0
    snr_stop: float = 16.0
    snr_step: float = 1.0
    min_errors: int = 100
    max_bits: int = 2_000_000
    trials: int = 20_000
    bias_values: tuple[float, ...] = (3.0, 3.2, 3.5)
    v_bias: float = 3.5
    drive_scale: float = 0.0  # 0 selects one sixth of the conduction window
    frontend: str = "led"
    channel: str = "traced"
    reflections: int = 3
    patch_size: float = 0.2
    time_resolution: float = 1e-9
    noise_dbm: float = -10.0
    sample_rate: float = 1e8
    cp_length: int = 16
    target_ber: float = 1e-3
    interleaver_rows: int = 32
    frames_per_block: int = 4

    def validate(self) -> None:
        def bad(field: str, message: str) -> ConfigError:
            return ConfigError(f"{field}: {message}")

        if self.kind not in KINDS:
            raise bad("kind", f"expected one of {', '.join(KINDS)}, got {self.kind!r}")
        if self.seed < 0:
            raise bad("seed", "must be a non-negative integer")
        if not self.schemes:
            raise bad("schemes", "must name at least one scheme")
        for s in self.schemes:
            if s not in SCHEMES:
                raise bad("schemes", f"unknown scheme {s!r} (expected {', '.join(SCHEMES)})")
        for m in self.m_values:
            if m not in SUPPORTED_ORDERS:
                raise bad(
                    "m_values",
                    f"unsupported constellation order {m} "
                    f"(expected one of {SUPPORTED_ORDERS})",
                )
        for n in self.n_values:
            if n < 2 or n & (n - 1):
                raise bad("n_values", f"{n} is not a power of two >= 2")
        if self.snr_step <= 0:
            raise bad("snr_step", "must be positive")
        if self.snr_stop < self.snr_start:
            raise bad("snr_stop", "must not be below snr_start")
        if self.min_errors < 1:
            raise bad("min_errors", "must be at least 1")
        if self.max_bits < 1:
            raise bad("max_bits", "must be at least 1")
        if self.trials < 1:
            raise bad("trials", "must be at least 1")
        if not self.bias_values:
            raise bad("bias_values", "must name at least one bias point")
        if self.drive_scale < 0:
            raise bad("drive_scale", "must be zero (auto) or positive")
        if self.frontend not in FRONTENDS:
            raise bad("frontend", f"expected one of {FRONTENDS}, got {self.frontend!r}")
        if self.channel not in CHANNELS:
            raise bad("channel", f"expected one of {CHANNELS}, got {self.channel!r}")
        if self.reflections < 0:
            raise bad("reflections", "must be non-negative")
        if self.patch_size <= 0:
            raise bad("patch_size", "must be positive")
        if self.time_resolution <= 0:
            raise bad("time_resolution", "must be positive")
        if self.sample_rate <= 0:
            raise bad("sample_rate", "must be positive")
        if self.cp_length < 0:
            raise bad("cp_length", "must be non-negative")
        if not 0.0 < self.target_ber < 1.0:
            raise bad("target_ber", "must lie strictly between 0 and 1")
        if self.interleaver_rows < 2:
            raise bad("interleaver_rows", "must be at least 2")
        if self.frames_per_block < 1:
            raise bad("frames_per_block", "must be at least 1")

    def snr_grid(self) -> list[float]:
        grid = []
        value = self.snr_start
        step = self.snr_step
        count = int(round((self.snr_stop - self.snr_start) / step)) + 1
        for i in range(max(count, 1)):
            value = self.snr_start + i * step
            if value > self.snr_stop + 1e-9:
                break
            grid.append(round(value, 9))
        return grid


_DOCS = {
    "kind": "experiment type: " + " | ".join(KINDS),
    "seed": "base RNG seed; every reported record derives from it",
    "schemes": "comma list drawn from " + ", ".join(SCHEMES),
    "m_values": "constellation orders, comma list drawn from {4, 16, 64}",
    "n_values": "data symbols per frame (power of two); FFT length is 4N",
    "snr_start": "first electrical SNR grid point, dB",
    "snr_stop": "last electrical SNR grid point, dB",
    "snr_step": "SNR grid spacing, dB",
    "min_errors": "stop a point after this many bit errors",
    "max_bits": "hard per-point bit budget",
    "trials": "frames per PAPR distribution curve",
    "bias_values": "LED bias voltages for the bias sweep, volts",
    "v_bias": "LED bias voltage for single-bias experiments, volts",
    "drive_scale": "volts of drive per unit signal; 0 picks window/6",
    "frontend": "ideal (distortionless) or led (fitted device curve)",
    "channel": "flat (single tap) or traced (ray-traced room response)",
    "reflections": "highest reflection order for the traced channel",
    "patch_size": "surface discretization edge for the traced channel, m",
    "time_resolution": "trace bin width, seconds",
    "noise_dbm": "receiver noise power, dBm",
    "sample_rate": "link sample rate, Hz",
    "cp_length": "cyclic prefix samples per frame",
    "target_ber": "BER at which normalized SNR offsets are read",
    "interleaver_rows": "block interleaver rows for coded runs",
    "frames_per_block": "frames per codeword for coded runs",
}


def parse_key_values(text: str) -> dict[str, tuple[str, int]]:
    """Split config text into {key: (raw value, line number)}."""
    pairs: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in pairs:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} (first set on line {pairs[key][1]})"
            )
        pairs[key] = (value, lineno)
    return pairs


def _convert(key: str, raw: str, lineno: int, annotation: str):
    def err(expected: str) -> ConfigError:
        return ConfigError(f"line {lineno}: {key}: expected {expected}, got {raw!r}")

    try:
        if annotation == "int":
            return int(raw)
        if annotation == "float":
            return float(raw)
        if annotation == "str":
            return raw
        if annotation.startswith("tuple["):
            inner = annotation[len("tuple[") : -len(", ...]")]
            items = [v.strip() for v in raw.split(",") if v.strip()]
            if not items:
                raise err("a non-empty comma-separated list")
            if inner == "int":
                return tuple(int(v) for v in items)
            if inner == "float":
                return tuple(float(v) for v in items)
            return tuple(items)
    except ConfigError:
        raise
    except ValueError:
        kind = {"int": "an integer", "float": "a number"}.get(
            annotation if not annotation.startswith("tuple") else annotation[6:-6],
            "a valid value",
        )
        raise err(kind + (" list" if annotation.startswith("tuple") else "")) from None
    raise AssertionError(f"unhandled annotation {annotation} for {key}")


def build_config(pairs: dict[str, tuple[str, int]], **overrides) -> ExperimentConfig:
    """Typed config from parsed pairs; overrides win over file values."""
    annotations = {f.name: f.type for f in fields(ExperimentConfig)}
    values: dict[str, object] = {}
    for key, (raw, lineno) in pairs.items():
        if key not in annotations:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw, lineno, annotations[key])
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    for required in ("kind", "seed"):
        if required not in values:
            raise ConfigError(f"missing required key {required!r}")
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def load_config(path, **overrides) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return build_config(parse_key_values(text), **overrides)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_lines(cfg: ExperimentConfig) -> list[str]:
    """Resolved key=value lines in declaration order (manifest format)."""
    out = []
    for f in fields(ExperimentConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        else:
            text = str(value)
        out.append(f"{f.name} = {text}")
    return out


def reference_text(kind: str = "ber", seed: int = 0) -> str:
    """A complete commented config with every key at its default."""
    cfg = ExperimentConfig(kind=kind, seed=seed)
    cfg.validate()
    lines = ["# experiment configuration reference (all keys, default values)"]
    for line in config_lines(cfg):
        key = line.split(" =", 1)[0]
        lines.append(f"{line}  # {_DOCS[key]}")
    return "\n".join(lines) + "\n"
