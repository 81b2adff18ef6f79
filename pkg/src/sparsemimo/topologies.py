"""Array topology generators.

Arrays lie in the ``y = 0`` plane, centered on the origin, ``x`` horizontal
and ``z`` vertical.
"""

from __future__ import annotations

import numpy as np

from .errors import SynthError
from .model import ArrayTopology


def line(n: int, pitch: float, axis: str = "x", center=(0.0, 0.0)) -> np.ndarray:
    """``n`` positions at ``pitch`` along ``axis``, centered on ``center``
    (the (x, z) midpoint)."""
    if n < 1:
        raise SynthError("line needs at least one element")
    offs = (np.arange(n) - (n - 1) / 2) * pitch
    pos = np.zeros((n, 3))
    pos[:, 0], pos[:, 2] = center
    pos[:, 0 if axis == "x" else 2] += offs
    return pos


def plane(n_x: int, n_z: int, pitch_x: float, pitch_z: float = None) -> np.ndarray:
    """Rectangular lattice ordered z-outer, x-inner."""
    pitch_z = pitch_x if pitch_z is None else pitch_z
    xs = (np.arange(n_x) - (n_x - 1) / 2) * pitch_x
    zs = (np.arange(n_z) - (n_z - 1) / 2) * pitch_z
    zz, xx = np.meshgrid(zs, xs, indexing="ij")
    return np.column_stack([xx.ravel(), np.zeros(xx.size), zz.ravel()])


def corners(spacing_x: float, spacing_z: float = None) -> np.ndarray:
    """Four elements on the corners of a ``spacing_x`` by ``spacing_z`` square."""
    spacing_z = spacing_x if spacing_z is None else spacing_z
    return plane(2, 2, spacing_x, spacing_z)


def uniform_linear(n_tx: int, tx_pitch: float, n_rx: int, rx_pitch: float) -> ArrayTopology:
    """Collinear tx and rx lines along x, both centered."""
    return ArrayTopology(line(n_tx, tx_pitch), line(n_rx, rx_pitch))


def corners_tx_planar_rx(tx_spacing: float, n_rx_x: int, n_rx_z: int,
                         rx_pitch: float) -> ArrayTopology:
    return ArrayTopology(corners(tx_spacing), plane(n_rx_x, n_rx_z, rx_pitch))


def t_shaped(n_tx: int, n_rx: int, pitch: float, tx_pitch: float = None) -> ArrayTopology:
    """Horizontal tx line along the top edge of a vertical rx line.

    The tx line sits at the height of the rx line's upper end and the rx line
    hangs below the tx line's midpoint, forming a T.
    """
    tx_pitch = pitch if tx_pitch is None else tx_pitch
    rx_len = (n_rx - 1) * pitch
    top = rx_len / 2
    tx = line(n_tx, tx_pitch, "x", center=(0.0, top))
    rx = line(n_rx, pitch, "z", center=(0.0, 0.0))
    return ArrayTopology(tx, rx)


def equally_spaced(full_positions: np.ndarray, n: int, pitch: float,
                   axis: str = "x") -> np.ndarray:
    """``n`` elements at ``pitch`` centered on the extent of ``full_positions``.

    Only the coordinate along ``axis`` is regenerated; the other coordinate
    is the centroid of the full array.
    """
    ai = 0 if axis == "x" else 2
    lo, hi = full_positions[:, ai].min(), full_positions[:, ai].max()
    other = 2 - ai
    center = [0.0, 0.0]
    center[0 if ai == 0 else 1] = 0.5 * (lo + hi)
    center[1 if ai == 0 else 0] = float(full_positions[:, other].mean())
    return line(n, pitch, axis, center=tuple(center))


def equally_spaced_plane(full_positions: np.ndarray, n_x: int, n_z: int,
                         pitch: float) -> np.ndarray:
    """``n_x`` by ``n_z`` lattice at ``pitch`` centered on the full aperture."""
    pos = plane(n_x, n_z, pitch)
    pos[:, 0] += 0.5 * (full_positions[:, 0].min() + full_positions[:, 0].max())
    pos[:, 2] += 0.5 * (full_positions[:, 2].min() + full_positions[:, 2].max())
    return pos


def random_subset(full_positions: np.ndarray, n: int, seed: int) -> np.ndarray:
    """``n`` candidate positions drawn without replacement, index-sorted."""
    if not 1 <= n <= full_positions.shape[0]:
        raise SynthError(f"cannot draw {n} of {full_positions.shape[0]} positions")
    rng = np.random.Generator(np.random.PCG64(np.uint64(seed)))
    idx = np.sort(rng.choice(full_positions.shape[0], size=n, replace=False))
    return full_positions[idx]


def random_sparse(full: ArrayTopology, counts: dict, seed: int) -> ArrayTopology:
    """Random subsets of each side of ``full`` sized by ``counts``.

    One PCG64 stream seeded with ``seed`` draws the tx side first, then rx;
    sides missing from ``counts`` are kept whole.  Retained elements get unit
    weights.
    """
    rng = np.random.Generator(np.random.PCG64(np.uint64(seed)))
    sides = {}
    for side in ("tx", "rx"):
        pos = full.positions(side)
        n = counts.get(side)
        if n is None:
            sides[side] = pos
            continue
        if not 1 <= n <= pos.shape[0]:
            raise SynthError(f"cannot draw {n} of {pos.shape[0]} {side} positions")
        sides[side] = pos[np.sort(rng.choice(pos.shape[0], size=n, replace=False))]
    return ArrayTopology(sides["tx"], sides["rx"])
