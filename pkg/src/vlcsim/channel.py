"""Recursive Lambertian ray tracing for a rectangular room.

The six surfaces are split into near-square patches that act as ideal
diffuse (first-order Lambertian) re-emitters regardless of the source
mode.  Reflection orders 0..2 bin the exact sum of the hop delays; higher
orders propagate time-binned per-patch fluxes, so each extra hop adds at
most half a bin of delay quantization.

Axis convention: x in [0, length] (west wall at x=0, east at x=length),
y in [0, width] (south at y=0, north at y=width), z in [0, height]
(floor at z=0).  Surface normals point into the room.  Orientations are
azimuth/elevation in degrees; elevation -90 points straight down.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.signal import fftconvolve

from .modem import SignalFrame

SPEED_OF_LIGHT = 299_792_458.0

_CHUNK = 192


@dataclass
class RoomConfig:
    """Room geometry, surface reflectivities, source and receiver."""

    length: float = 6.0
    width: float = 5.0
    height: float = 3.0
    rho_north: float = 0.8
    rho_south: float = 0.8
    rho_east: float = 0.8
    rho_west: float = 0.8
    rho_ceiling: float = 0.8
    rho_floor: float = 0.3
    source_x: float = 0.1
    source_y: float = 0.2
    source_z: float = 3.0
    source_azimuth_deg: float = 0.0
    source_elevation_deg: float = -90.0
    source_mode: float = 1.0
    receiver_x: float = 2.5
    receiver_y: float = 2.5
    receiver_z: float = 1.0
    receiver_azimuth_deg: float = 0.0
    receiver_elevation_deg: float = 90.0
    receiver_area_m2: float = 1e-4
    receiver_fov_deg: float = 85.0

    def __post_init__(self) -> None:
        for name in ("length", "width", "height"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in (
            "rho_north",
            "rho_south",
            "rho_east",
            "rho_west",
            "rho_ceiling",
            "rho_floor",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        bounds = (self.length, self.width, self.height)
        for who in ("source", "receiver"):
            pos = self._pos(who)
            for axis, (coord, limit) in enumerate(zip(pos, bounds)):
                if not 0.0 <= coord <= limit:
                    raise ValueError(
                        f"{who} coordinate {coord} outside axis-{axis} "
                        f"range [0, {limit}]"
                    )
        if not self.source_mode >= 1:
            raise ValueError(f"source_mode must be >= 1, got {self.source_mode}")
        if not 0.0 < self.receiver_fov_deg <= 90.0:
            raise ValueError(
                f"receiver_fov_deg must lie in (0, 90], got {self.receiver_fov_deg}"
            )
        if not self.receiver_area_m2 > 0:
            raise ValueError("receiver_area_m2 must be positive")
        if np.allclose(self._pos("source"), self._pos("receiver")):
            raise ValueError("source and receiver positions coincide")

    def _pos(self, who: str) -> np.ndarray:
        return np.array(
            [getattr(self, f"{who}_x"), getattr(self, f"{who}_y"), getattr(self, f"{who}_z")]
        )

    def source_position(self) -> np.ndarray:
        return self._pos("source")

    def receiver_position(self) -> np.ndarray:
        return self._pos("receiver")

    def source_normal(self) -> np.ndarray:
        return _orientation(self.source_azimuth_deg, self.source_elevation_deg)

    def receiver_normal(self) -> np.ndarray:
        return _orientation(self.receiver_azimuth_deg, self.receiver_elevation_deg)

    def canonical_key(self) -> str:
        parts = [f"{f.name}={getattr(self, f.name)!r}" for f in fields(self)]
        return ";".join(parts)


@dataclass
class ChannelImpulseResponse:
    dt: float
    gains: np.ndarray
    reflections: int

    def __post_init__(self) -> None:
        self.gains = np.asarray(self.gains, dtype=np.float64).ravel()
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.reflections < 0:
            raise ValueError("reflections must be >= 0")
        if self.gains.size == 0:
            raise ValueError("impulse response has no bins")


def total_gain(cir: ChannelImpulseResponse) -> float:
    """Collected flux per unit emitted flux (the DC channel gain)."""
    return float(np.sum(cir.gains))


def _orientation(azimuth_deg: float, elevation_deg: float) -> np.ndarray:
    az = np.deg2rad(azimuth_deg)
    el = np.deg2rad(elevation_deg)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


@dataclass
class _PatchGrid:
    centers: np.ndarray  # (P, 3)
    normals: np.ndarray  # (P, 3)
    areas: np.ndarray  # (P,)
    rho: np.ndarray  # (P,)


def _build_patches(room: RoomConfig, patch_size: float) -> _PatchGrid:
    l, w, h = room.length, room.width, room.height
    # origin, u axis/extent, v axis/extent, inward normal, reflectivity
    ex, ey, ez = np.eye(3)
    surfaces = [
        ((0, 0, 0), ex, l, ey, w, ez, room.rho_floor),
        ((0, 0, h), ex, l, ey, w, -ez, room.rho_ceiling),
        ((0, 0, 0), ey, w, ez, h, ex, room.rho_west),
        ((l, 0, 0), ey, w, ez, h, -ex, room.rho_east),
        ((0, 0, 0), ex, l, ez, h, ey, room.rho_south),
        ((0, w, 0), ex, l, ez, h, -ey, room.rho_north),
    ]
    centers, normals, areas, rho = [], [], [], []
    for origin, u, eu, v, ev, normal, refl in surfaces:
        nu = max(1, int(np.ceil(eu / patch_size)))
        nv = max(1, int(np.ceil(ev / patch_size)))
        du, dv = eu / nu, ev / nv
        iu = (np.arange(nu) + 0.5) * du
        iv = (np.arange(nv) + 0.5) * dv
        uu, vv = np.meshgrid(iu, iv, indexing="ij")
        pts = (
            np.asarray(origin)[None, :]
            + uu.ravel()[:, None] * u[None, :]
            + vv.ravel()[:, None] * v[None, :]
        )
        centers.append(pts)
        normals.append(np.broadcast_to(normal, pts.shape).copy())
        areas.append(np.full(pts.shape[0], du * dv))
        rho.append(np.full(pts.shape[0], refl))
    return _PatchGrid(
        centers=np.concatenate(centers),
        normals=np.concatenate(normals),
        areas=np.concatenate(areas),
        rho=np.concatenate(rho),
    )


def _lambertian_transfer(
    src_pos: np.ndarray,
    src_normal: np.ndarray,
    mode: float,
    dst_pos: np.ndarray,
    dst_normal: np.ndarray,
    dst_area: np.ndarray,
    min_cos_incidence: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Flux fraction and path delay from one emitter to many receivers."""
    vec = dst_pos - src_pos[None, :]
    d2 = np.einsum("ij,ij->i", vec, vec)
    d = np.sqrt(d2)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_e = (vec @ src_normal) / d
        cos_i = -np.einsum("ij,ij->i", vec, dst_normal) / d
        gain = (
            (mode + 1.0)
            / (2.0 * np.pi)
            * np.power(np.maximum(cos_e, 0.0), mode)
            * np.maximum(cos_i, 0.0)
            * dst_area
            / d2
        )
    ok = (d2 > 0) & (cos_e > 0) & (cos_i > min_cos_incidence)
    gain = np.where(ok, gain, 0.0)
    delay = np.where(d2 > 0, d / SPEED_OF_LIGHT, 0.0)
    return gain, delay


def _receiver_pickup(
    room: RoomConfig, grid: _PatchGrid
) -> tuple[np.ndarray, np.ndarray]:
    """Per unit flux re-emitted by each patch (Lambertian order 1)."""
    fov_floor = float(np.cos(np.deg2rad(room.receiver_fov_deg)))
    gains = np.zeros(grid.centers.shape[0])
    delays = np.zeros(grid.centers.shape[0])
    rx = room.receiver_position()
    rn = room.receiver_normal()
    vec = rx[None, :] - grid.centers
    d2 = np.einsum("ij,ij->i", vec, vec)
    d = np.sqrt(d2)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_e = np.einsum("ij,ij->i", vec, grid.normals) / d
        cos_i = -(vec @ rn) / d
        g = (
            (2.0 / (2.0 * np.pi))
            * np.maximum(cos_e, 0.0)
            * np.maximum(cos_i, 0.0)
            * room.receiver_area_m2
            / d2
        )
    # the field-of-view cuts on the incidence angle at the detector
    ok = (d2 > 0) & (cos_e > 0) & (cos_i >= fov_floor - 1e-12) & (cos_i > 0)
    gains = np.where(ok, g, 0.0)
    delays = np.where(d2 > 0, d / SPEED_OF_LIGHT, 0.0)
    return gains, delays


def _los_contribution(room: RoomConfig) -> tuple[float, float]:
    fov_floor = float(np.cos(np.deg2rad(room.receiver_fov_deg)))
    gain, delay = _lambertian_transfer(
        room.source_position(),
        room.source_normal(),
        room.source_mode,
        room.receiver_position()[None, :],
        room.receiver_normal()[None, :],
        np.array([room.receiver_area_m2]),
        min_cos_incidence=fov_floor - 1e-12,
    )
    return float(gain[0]), float(delay[0])


def simulate_impulse_response(
    room: RoomConfig,
    reflections: int,
    patch_size: float = 0.2,
    time_resolution: float = 1e-9,
) -> ChannelImpulseResponse:
    """Time-binned impulse response including orders 0..reflections."""
    if reflections < 0:
        raise ValueError("reflections must be >= 0")
    if not patch_size > 0:
        raise ValueError("patch_size must be positive")
    if not time_resolution > 0:
        raise ValueError("time_resolution must be positive")

    dt = time_resolution
    diag = float(np.linalg.norm([room.length, room.width, room.height]))
    n_bins = int(np.ceil((reflections + 1) * diag / SPEED_OF_LIGHT / dt)) + 2
    h = np.zeros(n_bins)

    los_gain, los_delay = _los_contribution(room)
    if los_gain > 0:
        h[int(round(los_delay / dt))] += los_gain

    if reflections >= 1:
        grid = _build_patches(room, patch_size)
        src_gain, src_delay = _lambertian_transfer(
            room.source_position(),
            room.source_normal(),
            room.source_mode,
            grid.centers,
            grid.normals,
            grid.areas,
        )
        rx_gain, rx_delay = _receiver_pickup(room, grid)

        w1 = grid.rho * src_gain * rx_gain
        bins1 = np.round((src_delay + rx_delay) / dt).astype(np.int64)
        h += np.bincount(bins1, weights=w1, minlength=n_bins)[:n_bins]

    if reflections >= 2:
        h += _second_order(grid, src_gain, src_delay, rx_gain, rx_delay, dt, n_bins)

    if reflections >= 3:
        flux = np.zeros((grid.centers.shape[0], n_bins))
        src_bins = np.round(src_delay / dt).astype(np.int64)
        flux[np.arange(src_bins.size), src_bins] = src_gain
        rx_bins = np.round(rx_delay / dt).astype(np.int64)
        pick_w = grid.rho * rx_gain
        for order in range(2, reflections + 1):
            flux = _bounce(grid, flux, dt)
            if order >= 3:
                h += _pickup(flux, pick_w, rx_bins, n_bins)

    last = int(np.max(np.nonzero(h)[0])) + 1 if np.any(h) else 1
    return ChannelImpulseResponse(dt=dt, gains=h[:last], reflections=reflections)


def _patch_to_patch(
    grid: _PatchGrid, lo: int, hi: int
) -> tuple[np.ndarray, np.ndarray]:
    """Transfer gains and delays from patches [lo, hi) to all patches."""
    vec = grid.centers[None, :, :] - grid.centers[lo:hi, None, :]
    d2 = np.einsum("cpk,cpk->cp", vec, vec)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_e = np.einsum("cpk,ck->cp", vec, grid.normals[lo:hi]) / np.sqrt(d2)
        cos_i = -np.einsum("cpk,pk->cp", vec, grid.normals) / np.sqrt(d2)
        t = cos_e * cos_i * grid.areas[None, :] / (np.pi * d2)
    ok = (d2 > 0) & (cos_e > 0) & (cos_i > 0)
    t = np.where(ok, t, 0.0)
    delay = np.where(d2 > 0, np.sqrt(d2) / SPEED_OF_LIGHT, 0.0)
    return t, delay


def _second_order(
    grid: _PatchGrid,
    src_gain: np.ndarray,
    src_delay: np.ndarray,
    rx_gain: np.ndarray,
    rx_delay: np.ndarray,
    dt: float,
    n_bins: int,
) -> np.ndarray:
    """Exact-delay two-bounce accumulation, chunked over emitting patches."""
    h2 = np.zeros(n_bins)
    n = grid.centers.shape[0]
    emit = grid.rho * src_gain  # flux re-emitted after the first hop
    collect = grid.rho * rx_gain
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        t, d_pq = _patch_to_patch(grid, lo, hi)
        w = emit[lo:hi, None] * t * collect[None, :]
        delays = src_delay[lo:hi, None] + d_pq + rx_delay[None, :]
        bins = np.round(delays / dt).astype(np.int64)
        nz = w > 0
        h2 += np.bincount(bins[nz], weights=w[nz], minlength=n_bins)[:n_bins]
    return h2


def _bounce(grid: _PatchGrid, flux: np.ndarray, dt: float) -> np.ndarray:
    """One diffuse reflection: incident per-patch flux to the next order."""
    n, n_bins = flux.shape
    out = np.zeros_like(flux)
    reemit = grid.rho[:, None] * flux
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        t, d_pq = _patch_to_patch(grid, lo, hi)
        shifts = np.round(d_pq / dt).astype(np.int64)
        local = reemit[lo:hi]
        nz_rows = np.any(local != 0, axis=1)
        if not np.any(nz_rows):
            continue
        for s in np.unique(shifts[nz_rows]):
            ip, iq = np.nonzero((shifts == s) & (t > 0) & nz_rows[:, None])
            if ip.size == 0:
                continue
            m = coo_matrix(
                (t[ip, iq], (iq, ip)), shape=(n, hi - lo)
            ).tocsr()
            width = n_bins - s
            if width <= 0:
                continue
            out[:, s:] += m @ local[:, :width]
    return out


def _pickup(
    flux: np.ndarray, pick_w: np.ndarray, rx_bins: np.ndarray, n_bins: int
) -> np.ndarray:
    h = np.zeros(n_bins)
    for s in np.unique(rx_bins):
        sel = rx_bins == s
        width = n_bins - s
        h[s:] += pick_w[sel] @ flux[sel, :width]
    return h


def resample_cir(
    cir: ChannelImpulseResponse, sample_period: float
) -> ChannelImpulseResponse:
    """Re-bin to a coarser grid; bin sums conserve the total gain."""
    if sample_period < cir.dt * (1 - 1e-12):
        raise ValueError(
            f"sample period {sample_period} finer than the response bin {cir.dt}"
        )
    idx = np.round(np.arange(cir.gains.size) * cir.dt / sample_period).astype(np.int64)
    gains = np.bincount(idx, weights=cir.gains)
    return ChannelImpulseResponse(
        dt=sample_period, gains=gains, reflections=cir.reflections
    )


def propagate(
    frame: SignalFrame,
    cir: ChannelImpulseResponse,
    noise_power_dbm: float | None,
    seed: int | None = None,
) -> SignalFrame:
    """Linear convolution with the CIR plus white Gaussian receiver noise.

    The output keeps the full convolution tail (frame + CIR - 1 samples).
    noise_power_dbm of None or -inf disables the noise source.
    """
    period = 1.0 / frame.sample_rate
    if abs(period - cir.dt) > 1e-9 * cir.dt:
        raise ValueError(
            f"frame sample period {period} does not match the response bin {cir.dt}"
        )
    samples = np.atleast_2d(frame.samples)
    y = fftconvolve(samples, cir.gains[None, :], mode="full", axes=1)
    if noise_power_dbm is not None and np.isfinite(noise_power_dbm):
        variance = 10.0 ** ((noise_power_dbm - 30.0) / 10.0)
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, np.sqrt(variance), size=y.shape)
    return SignalFrame(y[0] if frame.samples.ndim == 1 else y, frame.sample_rate)


def save_cir(path, cir: ChannelImpulseResponse) -> None:
    """Write the exchange format: '# dt=', '# K=', then one gain per line."""
    path = Path(path)
    lines = [f"# dt={cir.dt!r}", f"# K={cir.reflections}"]
    lines.extend(repr(float(g)) for g in cir.gains)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".cir-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_cir(path) -> ChannelImpulseResponse:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3 or not lines[0].startswith("# dt=") or not lines[1].startswith("# K="):
        raise ValueError(f"{path}: not a channel impulse response file")
    dt = float(lines[0][len("# dt=") :])
    reflections = int(lines[1][len("# K=") :])
    gains = np.array([float(v) for v in lines[2:] if v.strip()])
    return ChannelImpulseResponse(dt=dt, gains=gains, reflections=reflections)


def cached_impulse_response(
    room: RoomConfig,
    reflections: int,
    patch_size: float = 0.2,
    time_resolution: float = 1e-9,
    cache_dir=None,
) -> ChannelImpulseResponse:
    """simulate_impulse_response with a file cache keyed by the inputs."""
    if cache_dir is None:
        return simulate_impulse_response(room, reflections, patch_size, time_resolution)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = "|".join(
        [
            room.canonical_key(),
            f"K={reflections}",
            f"patch={patch_size!r}",
            f"dt={time_resolution!r}",
        ]
    )
    digest = hashlib.sha256(key.encode()).hexdigest()[:20]
    path = cache_dir / f"cir-{digest}.txt"
    if path.exists():
        return load_cir(path)
    cir = simulate_impulse_response(room, reflections, patch_size, time_resolution)
    save_cir(path, cir)
    return cir
