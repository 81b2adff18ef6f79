"""Delay-and-sum back-projection and sensing-matrix assembly.

Both routines share :func:`_compensation`, so the sensing matrix applied to
a weight vector reproduces :func:`bp_image` up to summation-order rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import DimensionMismatch, EmptyInput, SynthError
from .model import ArrayTopology, ScatteredField, as_points, distances, wavenumbers

PIXEL_BLOCK = 2048


@dataclass(frozen=True)
class RectInfo:
    """Rectangular layout of an image plane at range ``R0``.

    Pixel ``(iz, ix)`` sits at ``(x0 + ix*dx, R0, z0 + iz*dz)`` and is stored
    at flat index ``iz*n_x + ix`` (z outer).
    """

    n_x: int
    n_z: int
    R0: float
    x0: float
    z0: float
    dx: float
    dz: float

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n_x)

    @property
    def z(self) -> np.ndarray:
        return self.z0 + self.dz * np.arange(self.n_z)


@dataclass(frozen=True, eq=False)
class ImageGrid:
    positions: np.ndarray
    rect: Optional[RectInfo] = None

    def __post_init__(self):
        pos = as_points(self.positions, "pixel positions")
        if pos.shape[0] == 0:
            raise EmptyInput("image grid must contain at least one pixel")
        if self.rect is not None and self.rect.n_x * self.rect.n_z != pos.shape[0]:
            raise DimensionMismatch(
                f"rect metadata {self.rect.n_x}x{self.rect.n_z} != {pos.shape[0]} pixels")
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return self.positions.shape[0]

    @classmethod
    def rectangular(cls, x0, dx, n_x, z0, dz, n_z, R0) -> "ImageGrid":
        info = RectInfo(int(n_x), int(n_z), float(R0), float(x0), float(z0),
                        float(dx), float(dz))
        zz, xx = np.meshgrid(info.z, info.x, indexing="ij")
        pos = np.column_stack([xx.ravel(), np.full(xx.size, info.R0), zz.ravel()])
        return cls(pos, info)

    @classmethod
    def centered(cls, D_x: float, D_z: float, n_x: int, n_z: int, R0: float,
                 x_c: float = 0.0, z_c: float = 0.0) -> "ImageGrid":
        """``n_x`` by ``n_z`` pixels spanning ``D_x`` by ``D_z`` edge to edge.

        An axis with a single pixel sits at the region center.
        """
        dx = D_x / (n_x - 1) if n_x > 1 else 0.0
        dz = D_z / (n_z - 1) if n_z > 1 else 0.0
        x0 = x_c - 0.5 * D_x if n_x > 1 else x_c
        z0 = z_c - 0.5 * D_z if n_z > 1 else z_c
        return cls.rectangular(x0, dx, n_x, z0, dz, n_z, R0)

    @classmethod
    def with_pitch(cls, D_x: float, D_z: float, pitch: float, R0: float,
                   x_c: float = 0.0, z_c: float = 0.0) -> "ImageGrid":
        """Display grid with square ``pitch`` covering the region; zero extent
        along an axis gives a single row or column."""
        n_x = int(np.floor(D_x / pitch + 1e-9)) + 1 if D_x > 0 else 1
        n_z = int(np.floor(D_z / pitch + 1e-9)) + 1 if D_z > 0 else 1
        x0 = x_c - 0.5 * (n_x - 1) * pitch
        z0 = z_c - 0.5 * (n_z - 1) * pitch
        return cls.rectangular(x0, pitch, n_x, z0, pitch, n_z, R0)

    def nearest(self, point) -> int:
        d = np.linalg.norm(self.positions - np.asarray(point, float), axis=1)
        return int(np.argmin(d))


@dataclass(frozen=True, eq=False)
class ImageField:
    grid: ImageGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if not np.iscomplexobj(v):
            v = v.astype(float)
        v = v.reshape(-1)
        if v.shape[0] != len(self.grid):
            raise DimensionMismatch(
                f"{v.shape[0]} values for a grid of {len(self.grid)} pixels")
        if not np.all(np.isfinite(v)):
            raise SynthError("image values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def as_2d(self) -> np.ndarray:
        """Values reshaped to ``(n_z, n_x)``."""
        r = self.grid.rect
        if r is None:
            raise DimensionMismatch("image grid has no rectangular metadata")
        return self.values.reshape(r.n_z, r.n_x)

    def magnitude(self) -> "ImageField":
        return ImageField(self.grid, np.abs(self.values))


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    """Map from candidate-element weights to image samples: ``E = B @ w``."""

    entries: np.ndarray = field(repr=False)
    grid: ImageGrid = None
    candidates: np.ndarray = None
    side: str = "rx"

    def __post_init__(self):
        b = np.asarray(self.entries, complex)
        if b.ndim != 2 or b.shape[0] != len(self.grid):
            raise DimensionMismatch(f"matrix shape {b.shape} vs {len(self.grid)} pixels")
        cand = as_points(self.candidates, "candidate positions")
        if cand.shape[0] != b.shape[1]:
            raise DimensionMismatch(
                f"{b.shape[1]} columns but {cand.shape[0]} candidate positions")
        if not np.all(np.isfinite(b)):
            raise SynthError("sensing matrix entries must be finite")
        b.setflags(write=False)
        object.__setattr__(self, "entries", b)
        object.__setattr__(self, "candidates", cand)

    @property
    def shape(self):
        return self.entries.shape

    def __matmul__(self, w):
        return self.entries @ np.asarray(w, complex)

    def image(self, w) -> ImageField:
        return ImageField(self.grid, self @ w)


def _compensation(dist: np.ndarray, k: np.ndarray) -> Iterator[np.ndarray]:
    """Yield ``4*pi*R*exp(+j*k_i*R)`` for each wavenumber in turn.

    Uniform ``k`` steps are generated by complex rotation from the first
    wavenumber, refreshed with a direct evaluation every 16 steps.
    """
    amp = 4.0 * np.pi * dist
    if k.size > 1:
        dk = k[1] - k[0]
        uniform = np.allclose(np.diff(k), dk, rtol=1e-12, atol=0.0)
    else:
        uniform = False
    if not uniform:
        for ki in k:
            yield amp * np.exp(1j * ki * dist)
        return
    step = np.exp(1j * dk * dist)
    cur = None
    for i, ki in enumerate(k):
        if i % 16 == 0:
            cur = amp * np.exp(1j * ki * dist)
        else:
            cur = cur * step
        yield cur


def _check_dims(fld: ScatteredField, topology: ArrayTopology):
    if (fld.n_tx, fld.n_rx) != (topology.n_tx, topology.n_rx):
        raise DimensionMismatch(
            f"field is {fld.n_tx}x{fld.n_rx} (tx x rx) but topology has "
            f"{topology.n_tx} tx and {topology.n_rx} rx elements")


def bp_image(fld: ScatteredField, topology: ArrayTopology,
             grid: ImageGrid) -> ImageField:
    """Delay-and-sum image of ``fld`` on ``grid`` using the topology weights.

    Every measurement is phase-compensated with ``exp(+j k R)`` and its
    spherical spreading restored by ``4 pi R`` on both the transmit and the
    receive leg before summation over receivers, transmitters and
    frequencies.
    """
    _check_dims(fld, topology)
    k = wavenumbers(fld.freqs)
    s = fld.samples
    out = np.zeros(len(grid), complex)
    for lo in range(0, len(grid), PIXEL_BLOCK):
        pix = grid.positions[lo:lo + PIXEL_BLOCK]
        d_t = distances(pix, topology.tx_positions)
        d_r = distances(pix, topology.rx_positions)
        acc = np.zeros(pix.shape[0], complex)
        for i, (phi_t, phi_r) in enumerate(zip(_compensation(d_t, k),
                                               _compensation(d_r, k))):
            rx_sum = phi_r @ (s[i] * topology.rx_weights).T      # (m, tx)
            acc += np.sum(phi_t * topology.tx_weights * rx_sum, axis=1)
        out[lo:lo + PIXEL_BLOCK] = acc
    return ImageField(grid, out)


def build_sensing_matrix(fld: ScatteredField, fixed_side: str,
                         topology: ArrayTopology, grid: ImageGrid) -> SensingMatrix:
    """Assemble the sensing matrix for the side opposite ``fixed_side``.

    With ``fixed_side="tx"`` the columns are receive candidates and
    ``B @ w_rx`` equals ``bp_image`` with receive weights ``w_rx``; with
    ``fixed_side="rx"`` roles are exchanged through reciprocity.
    """
    _check_dims(fld, topology)
    if fixed_side == "rx":
        mat = build_sensing_matrix(fld.transposed(), "tx", topology.swapped(), grid)
        return SensingMatrix(mat.entries, grid, topology.tx_positions, "tx")
    if fixed_side != "tx":
        raise ValueError(f"fixed_side must be 'tx' or 'rx', got {fixed_side!r}")

    k = wavenumbers(fld.freqs)
    s = fld.samples
    B = np.zeros((len(grid), topology.n_rx), complex)
    for lo in range(0, len(grid), PIXEL_BLOCK):
        pix = grid.positions[lo:lo + PIXEL_BLOCK]
        d_t = distances(pix, topology.tx_positions)
        d_r = distances(pix, topology.rx_positions)
        blk = np.zeros((pix.shape[0], topology.n_rx), complex)
        for i, (phi_t, phi_r) in enumerate(zip(_compensation(d_t, k),
                                               _compensation(d_r, k))):
            blk += phi_r * ((phi_t * topology.tx_weights) @ s[i])
        B[lo:lo + PIXEL_BLOCK] = blk
    return SensingMatrix(B, grid, topology.rx_positions, "rx")


def project_max_range(volume) -> ImageField:
    """Per-pixel maximum magnitude across range slices."""
    slices = list(volume)
    if not slices:
        raise EmptyInput("no slices to project")
    ref = slices[0].grid.rect
    if ref is None:
        raise DimensionMismatch("range slices need rectangular metadata")
    for sl in slices[1:]:
        r = sl.grid.rect
        if r is None or (r.n_x, r.n_z) != (ref.n_x, ref.n_z):
            raise DimensionMismatch("all slices must share (n_x, n_z)")
    mag = np.max(np.stack([np.abs(sl.values) for sl in slices]), axis=0)
    return ImageField(slices[0].grid, mag)


def project_max_axis(image: ImageField, axis: str = "z") -> ImageField:
    """Collapse a rectangular image by taking the max magnitude along ``axis``.

    ``axis="z"`` keeps the cross-range (x) profile, as used for cross-range
    PSF cuts; the result lies on a single-row grid at the original range.
    """
    r = image.grid.rect
    mag = np.abs(image.as_2d())
    if axis == "z":
        prof = mag.max(axis=0)
        grid = ImageGrid.rectangular(r.x0, r.dx, r.n_x, r.z0, r.dz, 1, r.R0)
    elif axis == "x":
        prof = mag.max(axis=1)
        grid = ImageGrid.rectangular(r.x0, r.dx, 1, r.z0, r.dz, r.n_z, r.R0)
    else:
        raise ValueError(f"axis must be 'x' or 'z', got {axis!r}")
    return ImageField(grid, prof)
