"""Nonlinear LED front-end: clamped fifth-order polynomial transfer.

The drive voltage is v[n] = v_bias + drive_scale * x[n], hard-limited to
the conduction window [v_ton, v_sat] before the polynomial is evaluated,
so the polynomial never extrapolates outside its fitted range.  The
default drive scale puts +/-3 signal RMS across the full window when
biased at its midpoint, assuming a unit-RMS drive waveform.

The shipped voltage-to-light table is a representative white-LED transfer
(turn-on at 3.0 V, saturation by 4.0 V) sampled from public datasheet
shapes; it is not a trace of any specific part.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
from numpy.polynomial import polynomial as npoly

from .modem import SignalFrame

POLY_DEGREE = 5
_MONOTONE_GRID = 1000


@dataclass
class DatasheetCurve:
    """Sampled forward-voltage to relative-light-output transfer."""

    voltages: np.ndarray
    outputs: np.ndarray

    def __post_init__(self) -> None:
        self.voltages = np.asarray(self.voltages, dtype=np.float64)
        self.outputs = np.asarray(self.outputs, dtype=np.float64)
        if self.voltages.shape != self.outputs.shape or self.voltages.ndim != 1:
            raise ValueError("curve columns must be 1-D and equal length")
        if self.voltages.size < POLY_DEGREE + 1:
            raise ValueError(
                f"curve needs at least {POLY_DEGREE + 1} points, "
                f"got {self.voltages.size}"
            )
        if np.any(np.diff(self.voltages) <= 0):
            raise ValueError("curve voltages must be strictly increasing")


@dataclass
class LedModel:
    """Polynomial light output over a hard conduction window."""

    coeffs: np.ndarray  # c0..c5, light(v) = sum c_i v^i
    v_ton: float
    v_sat: float
    v_bias: float
    drive_scale: float = field(default=0.0)

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (POLY_DEGREE + 1,):
            raise ValueError(f"expected {POLY_DEGREE + 1} polynomial coefficients")
        if not self.v_ton < self.v_sat:
            raise ValueError(
                f"v_ton {self.v_ton} must lie below v_sat {self.v_sat}"
            )
        if not self.v_ton <= self.v_bias <= self.v_sat:
            raise ValueError(
                f"v_bias {self.v_bias} outside [{self.v_ton}, {self.v_sat}]"
            )
        if self.drive_scale == 0.0:
            span = self.v_sat - self.v_ton
            self.drive_scale = span / 6.0 if np.isfinite(span) else 1.0
        if not self.drive_scale > 0:
            raise ValueError(f"drive_scale must be positive, got {self.drive_scale}")

    def output(self, v: np.ndarray) -> np.ndarray:
        v = np.clip(v, self.v_ton, self.v_sat)
        return npoly.polyval(v, self.coeffs)

    def small_signal_slope(self, v: float | None = None) -> float:
        at = self.v_bias if v is None else v
        return float(npoly.polyval(at, npoly.polyder(self.coeffs)))

    @classmethod
    def identity(cls) -> "LedModel":
        """Distortionless surrogate: output equals drive, no clamping."""
        coeffs = np.zeros(POLY_DEGREE + 1)
        coeffs[1] = 1.0
        return cls(
            coeffs=coeffs,
            v_ton=-np.inf,
            v_sat=np.inf,
            v_bias=0.0,
            drive_scale=1.0,
        )

    @classmethod
    def from_curve(
        cls,
        curve: DatasheetCurve,
        v_bias: float,
        drive_scale: float | None = None,
    ) -> "LedModel":
        coeffs = fit_polynomial(curve)
        v_ton = float(curve.voltages[0])
        v_sat = float(curve.voltages[-1])
        return cls(
            coeffs=coeffs,
            v_ton=v_ton,
            v_sat=v_sat,
            v_bias=v_bias,
            drive_scale=drive_scale if drive_scale is not None else 0.0,
        )


def fit_polynomial(curve: DatasheetCurve, degree: int = POLY_DEGREE) -> np.ndarray:
    """Least-squares polynomial fit, rejected if not monotone on the range."""
    coeffs = npoly.polyfit(curve.voltages, curve.outputs, degree)
    if degree != POLY_DEGREE:
        coeffs = np.pad(coeffs, (0, POLY_DEGREE - degree))
    grid = np.linspace(curve.voltages[0], curve.voltages[-1], _MONOTONE_GRID)
    values = npoly.polyval(grid, coeffs)
    span = float(values[-1] - values[0])
    if np.any(np.diff(values) < -1e-9 * max(abs(span), 1.0)):
        raise ValueError("polynomial fit is not monotone over the curve range")
    return coeffs


def led_apply(frame: SignalFrame, model: LedModel) -> SignalFrame:
    """Drive the LED with a frame; returns the emitted light waveform."""
    v = model.v_bias + model.drive_scale * frame.samples
    return SignalFrame(model.output(v), frame.sample_rate)


def load_datasheet_curve(path) -> DatasheetCurve:
    """Two-column text: forward voltage, relative output; '#' comments."""
    voltages: list[float] = []
    outputs: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(
                    f"{path}:{lineno}: expected two columns, got {len(parts)}"
                )
            try:
                voltages.append(float(parts[0]))
                outputs.append(float(parts[1]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return DatasheetCurve(np.array(voltages), np.array(outputs))


@lru_cache(maxsize=1)
def default_curve() -> DatasheetCurve:
    """The transfer table shipped with the package."""
    ref = resources.files("vlcsim").joinpath("data/led_vi_curve.txt")
    with resources.as_file(ref) as path:
        return load_datasheet_curve(path)


def default_led(v_bias: float = 3.5, drive_scale: float | None = None) -> LedModel:
    """LedModel fitted to the shipped curve at the requested bias point."""
    return LedModel.from_curve(default_curve(), v_bias=v_bias, drive_scale=drive_scale)
