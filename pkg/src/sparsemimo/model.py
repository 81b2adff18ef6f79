"""Geometry, frequency grids, scenes and the Born-approximation forward model.

Coordinates are in meters.  Arrays lie in (or near) the ``y = 0`` plane with
``x`` as azimuth and ``z`` as height; ``y`` is the range axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import CoincidentGeometry, DimensionMismatch, SynthError

C0 = 299_792_458.0
DUPLICATE_TOL = 1e-9
COINCIDENT_TOL = 1e-6


class Point3(NamedTuple):
    x: float
    y: float
    z: float


def as_points(points, name: str = "positions") -> np.ndarray:
    """Coerce ``points`` to a read-only ``(n, 3)`` float array of finite values."""
    arr = np.array(points, dtype=float)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DimensionMismatch(f"{name} must have shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SynthError(f"{name} contain non-finite coordinates")
    arr.setflags(write=False)
    return arr


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def wavenumber(freq):
    """Free-space wavenumber ``2*pi*f/c`` in rad/m."""
    return 2.0 * np.pi * np.asarray(freq, dtype=float) / C0


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform stepped-frequency sweep, both endpoints included."""

    f_start: float
    f_stop: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.f_start) and np.isfinite(self.f_stop)):
            raise SynthError("frequency bounds must be finite")
        if not self.f_start > 0:
            raise SynthError(f"f_start must be positive, got {self.f_start}")
        if not self.f_stop > self.f_start:
            raise SynthError(
                f"f_stop ({self.f_stop}) must exceed f_start ({self.f_start})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise SynthError(f"n_steps must be an integer >= 2, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def freqs(self) -> np.ndarray:
        return np.linspace(self.f_start, self.f_stop, self.n_steps)

    @property
    def f_center(self) -> float:
        return 0.5 * (self.f_start + self.f_stop)

    @property
    def k_center(self) -> float:
        return float(wavenumber(self.f_center))

    @property
    def lambda_center(self) -> float:
        return C0 / self.f_center

    @property
    def lambda_min(self) -> float:
        return C0 / self.f_stop


def wavenumbers(grid: FrequencyGrid) -> np.ndarray:
    """Wavenumbers of every step of ``grid`` (rad/m), strictly increasing."""
    return wavenumber(grid.freqs)


@dataclass(frozen=True, eq=False)
class Scene:
    """Point scatterers with complex reflectivities."""

    positions: np.ndarray
    reflectivity: np.ndarray

    def __post_init__(self):
        pos = as_points(self.positions, "scatterer positions")
        refl = np.broadcast_to(
            np.asarray(self.reflectivity, dtype=complex), (pos.shape[0],)).copy()
        if not np.all(np.isfinite(refl)):
            raise SynthError("reflectivities must be finite")
        refl.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "reflectivity", refl)

    @classmethod
    def empty(cls) -> "Scene":
        return cls(np.zeros((0, 3)), np.zeros(0, complex))

    @classmethod
    def points(cls, positions, reflectivity=1.0) -> "Scene":
        return cls(positions, reflectivity)

    def __len__(self):
        return self.positions.shape[0]

    def __add__(self, other: "Scene") -> "Scene":
        return Scene(np.vstack([self.positions, other.positions]),
                     np.concatenate([self.reflectivity, other.reflectivity]))

    def scaled(self, alpha: complex) -> "Scene":
        return Scene(self.positions, self.reflectivity * alpha)

    def subset(self, indices) -> "Scene":
        idx = np.asarray(indices, dtype=int).reshape(-1)
        return Scene(self.positions[idx], self.reflectivity[idx])


def _check_unique(pos: np.ndarray, role: str):
    if pos.shape[0] < 2:
        return
    pairs = cKDTree(pos).query_pairs(DUPLICATE_TOL)
    if pairs:
        i, j = sorted(min(pairs))
        raise SynthError(f"duplicate {role} positions at indices {i} and {j}")


@dataclass(frozen=True, eq=False)
class ArrayTopology:
    """Transmit and receive element positions with complex excitation weights."""

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    tx_weights: np.ndarray = None
    rx_weights: np.ndarray = None

    def __post_init__(self):
        for role in ("tx", "rx"):
            pos = as_points(getattr(self, f"{role}_positions"), f"{role} positions")
            if pos.shape[0] < 1:
                raise SynthError(f"topology needs at least one {role} element")
            _check_unique(pos, role)
            w = getattr(self, f"{role}_weights")
            w = np.ones(pos.shape[0], complex) if w is None else np.asarray(w, complex)
            if w.shape != (pos.shape[0],):
                raise DimensionMismatch(
                    f"{role} weights shape {w.shape} != ({pos.shape[0]},)")
            if not np.all(np.isfinite(w)):
                raise SynthError(f"{role} weights must be finite")
            object.__setattr__(self, f"{role}_positions", pos)
            object.__setattr__(self, f"{role}_weights", _frozen(w, complex))

    @property
    def n_tx(self) -> int:
        return self.tx_positions.shape[0]

    @property
    def n_rx(self) -> int:
        return self.rx_positions.shape[0]

    @property
    def n_elements(self) -> int:
        return self.n_tx + self.n_rx

    def swapped(self) -> "ArrayTopology":
        """Exchange transmit and receive roles."""
        return ArrayTopology(self.rx_positions, self.tx_positions,
                             self.rx_weights, self.tx_weights)

    def with_weights(self, tx=None, rx=None) -> "ArrayTopology":
        return ArrayTopology(
            self.tx_positions, self.rx_positions,
            self.tx_weights if tx is None else tx,
            self.rx_weights if rx is None else rx)

    def with_side(self, side: str, positions, weights=None) -> "ArrayTopology":
        """Replace the elements of one side (``"tx"`` or ``"rx"``)."""
        if side == "tx":
            return ArrayTopology(positions, self.rx_positions, weights, self.rx_weights)
        if side == "rx":
            return ArrayTopology(self.tx_positions, positions, self.tx_weights, weights)
        raise ValueError(f"side must be 'tx' or 'rx', got {side!r}")

    def positions(self, side: str) -> np.ndarray:
        return getattr(self, f"{side}_positions")

    def weights(self, side: str) -> np.ndarray:
        return getattr(self, f"{side}_weights")


@dataclass(frozen=True, eq=False)
class ScatteredField:
    """Complex field samples indexed ``(freq, tx, rx)``."""

    freqs: FrequencyGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 3 or s.shape[0] != self.freqs.n_steps:
            raise DimensionMismatch(
                f"samples shape {s.shape} incompatible with {self.freqs.n_steps} steps")
        if not np.all(np.isfinite(s)):
            raise SynthError("field samples must be finite")
        object.__setattr__(self, "samples", _frozen(s, complex))

    @property
    def n_tx(self) -> int:
        return self.samples.shape[1]

    @property
    def n_rx(self) -> int:
        return self.samples.shape[2]

    def transposed(self) -> "ScatteredField":
        """Field with tx and rx axes exchanged (reciprocity)."""
        return ScatteredField(self.freqs, np.swapaxes(self.samples, 1, 2))

    def __add__(self, other: "ScatteredField") -> "ScatteredField":
        if other.freqs != self.freqs or other.samples.shape != self.samples.shape:
            raise DimensionMismatch("fields live on different grids")
        return ScatteredField(self.freqs, self.samples + other.samples)

    def scaled(self, alpha: complex) -> "ScatteredField":
        return ScatteredField(self.freqs, self.samples * alpha)


def distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances, shape ``(len(a), len(b))``."""
    d = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", d, d))


def forward_scatter(scene: Scene, topology: ArrayTopology,
                    grid: FrequencyGrid) -> ScatteredField:
    """Simulate the Born-approximation MIMO field of ``scene``.

    Element weights are ignored here; they enter only through imaging and
    synthesis.  Each output cell is an independent sum over scatterers taken
    in scene order, so the result is exactly reciprocal under
    :meth:`ArrayTopology.swapped`.

    Raises
    ------
    CoincidentGeometry
        If any scatterer lies within 1e-6 m of an element.
    """
    k = wavenumbers(grid)
    n_tx, n_rx = topology.n_tx, topology.n_rx
    out = np.zeros((k.size, n_tx, n_rx), complex)
    if len(scene) == 0:
        return ScatteredField(grid, out)

    d_tx = distances(scene.positions, topology.tx_positions)
    d_rx = distances(scene.positions, topology.rx_positions)
    closest = min(d_tx.min(), d_rx.min())
    if closest <= COINCIDENT_TOL:
        raise CoincidentGeometry(
            f"scatterer within {closest:.3g} m of an array element")

    shape = out.shape
    re = np.empty(shape)
    im = np.empty(shape)
    tmp = np.empty(shape)
    for q, sigma in enumerate(scene.reflectivity):
        g_tx = np.exp(-1j * np.outer(k, d_tx[q])) / (4 * np.pi * d_tx[q])
        g_rx = np.exp(-1j * np.outer(k, d_rx[q])) / (4 * np.pi * d_rx[q])
        a, b = g_tx.real[:, :, None], g_tx.imag[:, :, None]
        c, d = g_rx.real[:, None, :], g_rx.imag[:, None, :]
        # complex product spelled out in real ufuncs: fused multiply-adds in
        # the complex kernel would break exact tx/rx symmetry
        np.multiply(a, c, out=re)
        np.multiply(b, d, out=tmp)
        re -= tmp
        np.multiply(a, d, out=im)
        np.multiply(b, c, out=tmp)
        im += tmp
        out += sigma * (re + 1j * im)
    return ScatteredField(grid, out)
