"""Point-spread-function measurements on rectangular images."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import DimensionMismatch, FlatImage
from .imaging import ImageField
from .model import Point3

HALF_POWER = 10 ** (-3 / 20)
NO_LOBE = float("-inf")


@dataclass(frozen=True)
class Sidelobe:
    position: Point3
    level_db: float


@dataclass(frozen=True)
class PsfReport:
    """Mainlobe widths are two-sided -3 dB widths in meters (``nan`` along an
    axis that has a single sample); lobe levels are dB relative to the peak,
    ``-inf`` when absent."""

    peak_position: Point3
    mainlobe_width_x: float
    mainlobe_width_z: float
    peak_sidelobe_level: float
    grating_lobe_level: float
    sidelobes: List[Sidelobe] = field(default_factory=list)
    peak_offset: float = 0.0

    def as_dict(self) -> dict:
        return {
            "peak_position": list(self.peak_position),
            "peak_offset_m": self.peak_offset,
            "mainlobe_width_x_m": self.mainlobe_width_x,
            "mainlobe_width_z_m": self.mainlobe_width_z,
            "peak_sidelobe_level_db": self.peak_sidelobe_level,
            "grating_lobe_level_db": self.grating_lobe_level,
            "sidelobes": [
                {"position": list(s.position), "level_db": s.level_db}
                for s in self.sidelobes
            ],
        }


def _half_power_width(profile: np.ndarray, ip: int, pitch: float) -> float:
    """Two-sided -3 dB width around ``profile[ip]`` with linear interpolation."""
    n = profile.size
    if n == 1 or pitch <= 0:
        return float("nan")

    def crossing(direction):
        i = ip
        while 0 <= i + direction < n and profile[i + direction] >= HALF_POWER:
            i += direction
        j = i + direction
        if not 0 <= j < n:
            return float(i)
        a, b = profile[i], profile[j]
        return i + direction * (a - HALF_POWER) / (a - b)

    return (crossing(1) - crossing(-1)) * pitch


def _mainlobe_mask(mag: np.ndarray, peak) -> np.ndarray:
    """Pixels reachable from the peak along non-increasing 4-neighbour paths.

    Along a single axis this is the -3 dB lobe extended down to the first
    local minimum on each side; no secondary local maximum can be reached.
    """
    nz, nx = mag.shape
    mask = np.zeros(mag.shape, bool)
    mask[peak] = True
    todo = deque([peak])
    while todo:
        iz, ix = todo.popleft()
        v = mag[iz, ix]
        for jz, jx in ((iz - 1, ix), (iz + 1, ix), (iz, ix - 1), (iz, ix + 1)):
            if 0 <= jz < nz and 0 <= jx < nx and not mask[jz, jx] and mag[jz, jx] <= v:
                mask[jz, jx] = True
                todo.append((jz, jx))
    return mask


def _local_maxima(mag: np.ndarray, region: np.ndarray) -> np.ndarray:
    """Indices (iz, ix) of 8-neighbour local maxima inside ``region``."""
    padded = np.pad(mag, 1, constant_values=-np.inf)
    nz, nx = mag.shape
    is_max = np.ones(mag.shape, bool)
    for dz in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dz == 0 and dx == 0:
                continue
            neigh = padded[1 + dz:1 + dz + nz, 1 + dx:1 + dx + nx]
            is_max &= mag >= neigh
    return np.argwhere(is_max & region & (mag > 0))


def psf_analyze(image: ImageField, true_position=None, *,
                grating_floor_db: float = 10.0,
                grating_distance: float = 3.0,
                max_sidelobes: int = 20) -> PsfReport:
    """Measure mainlobe widths and sidelobe/grating-lobe levels of a PSF image.

    Magnitudes are normalized to the global peak.  Everything outside the
    mainlobe basin counts as sidelobe region.  A sidelobe is reported as a
    grating lobe when it stands at least ``grating_floor_db`` above the median
    sidelobe-region level, lies at least ``grating_distance`` mainlobe widths
    from the peak and is higher than every sidelobe closer to the peak.
    """
    r = image.grid.rect
    if r is None:
        raise DimensionMismatch("psf_analyze needs a rectangular image grid")
    mag = np.abs(image.as_2d())
    top = mag.max()
    if not top > 0:
        raise FlatImage("image peak is zero")
    mag = mag / top
    peak = np.unravel_index(int(np.argmax(mag)), mag.shape)
    iz, ix = peak
    peak_pos = Point3(float(r.x[ix]), r.R0, float(r.z[iz]))
    offset = 0.0
    if true_position is not None:
        offset = float(np.linalg.norm(np.asarray(peak_pos) - np.asarray(true_position, float)))

    wx = _half_power_width(mag[iz, :], ix, r.dx)
    wz = _half_power_width(mag[:, ix], iz, r.dz)

    side = ~_mainlobe_mask(mag, peak)
    if not side.any() or not np.any(mag[side] > 0):
        return PsfReport(peak_pos, wx, wz, NO_LOBE, NO_LOBE, [], offset)

    with np.errstate(divide="ignore"):
        db = 20 * np.log10(mag)
    psl = float(db[side].max())
    floor = float(np.median(db[side]))

    lobes = _local_maxima(mag, side)
    order = np.argsort(-mag[lobes[:, 0], lobes[:, 1]], kind="stable")
    lobes = lobes[order]

    def norm_dist(jz, jx):
        # separation in units of mainlobe width; single-sample axes ignored
        ux = (jx - ix) * r.dx / wx if np.isfinite(wx) and wx > 0 else 0.0
        uz = (jz - iz) * r.dz / wz if np.isfinite(wz) and wz > 0 else 0.0
        return float(np.hypot(ux, uz))

    # a grating lobe is a resurgence: it must top every lobe nearer the peak
    grating = NO_LOBE
    dist = np.array([norm_dist(jz, jx) for jz, jx in lobes])
    levels = db[lobes[:, 0], lobes[:, 1]]
    for i in np.argsort(dist, kind="stable"):
        nearer = levels[dist < dist[i]]
        if (dist[i] >= grating_distance and levels[i] - floor >= grating_floor_db
                and (nearer.size == 0 or levels[i] > nearer.max())):
            grating = max(grating, float(levels[i]))

    sidelobes = [Sidelobe(Point3(float(r.x[jx]), r.R0, float(r.z[jz])), float(db[jz, jx]))
                 for jz, jx in lobes[:max_sidelobes]]
    return PsfReport(peak_pos, wx, wz, psl, grating, sidelobes, offset)
