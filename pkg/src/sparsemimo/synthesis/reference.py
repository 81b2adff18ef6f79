"""Apodized reference patterns and the subset-residual check."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import SubsetOutOfRange
from ..imaging import ImageField, SensingMatrix, bp_image, build_sensing_matrix
from ..model import ArrayTopology, FrequencyGrid, Scene, ScatteredField, forward_scatter
from .sampling import SamplingGrid

log = logging.getLogger(__name__)

# cosine-sum coefficients: w(u) = sum_k (-1)^k a_k cos(2 pi k u), u in [0, 1]
WINDOWS = {
    "uniform": (1.0,),
    "hamming": (0.54, 0.46),
    "hann": (0.5, 0.5),
    "blackman": (0.42, 0.5, 0.08),
}


def window_values(u: np.ndarray, name: str) -> np.ndarray:
    try:
        coeffs = WINDOWS[name]
    except KeyError:
        raise ValueError(f"unknown apodization window {name!r}; "
                         f"choose from {sorted(WINDOWS)}") from None
    u = np.asarray(u, float)
    out = np.zeros_like(u)
    for k, a in enumerate(coeffs):
        out += (-1) ** k * a * np.cos(2 * np.pi * k * u)
    return out


def apodize(positions: np.ndarray, name: str, min_count: int = 2) -> np.ndarray:
    """Separable aperture taper evaluated at each element position.

    Along each of x and z, the window is stretched over the element extent;
    axes with ``min_count`` or fewer distinct coordinates are left untapered.
    """
    w = np.ones(positions.shape[0])
    for axis in (0, 2):
        coord = positions[:, axis]
        distinct = np.unique(np.round(coord, 9))
        if distinct.size <= min_count:
            continue
        u = (coord - coord.min()) / (coord.max() - coord.min())
        w *= window_values(u, name)
    return w


def _other(side: str) -> str:
    return {"tx": "rx", "rx": "tx"}[side]


@dataclass(frozen=True, eq=False)
class ReferencePattern:
    """Target image of the apodized referenced array over the sampling grid.

    ``referenced`` carries the reference weights, ``scene`` the unit
    scatterers (one per sampling pixel) and ``field`` their simulated field.
    """

    grid: SamplingGrid
    E_ref: np.ndarray
    referenced: ArrayTopology
    scene: Scene
    field: ScatteredField
    apodization: str
    optimize: str = "rx"

    @property
    def fixed_side(self) -> str:
        return _other(self.optimize)

    @property
    def w_ref(self) -> np.ndarray:
        return self.referenced.weights(self.optimize)

    def sensing_matrix(self) -> SensingMatrix:
        return build_sensing_matrix(self.field, self.fixed_side, self.referenced,
                                    self.grid.image_grid)


def _check_nyquist(topology: ArrayTopology, side: str, freqs: FrequencyGrid):
    pos = topology.positions(side)
    if pos.shape[0] < 2:
        return
    from scipy.spatial import cKDTree
    d, _ = cKDTree(pos).query(pos, k=2)
    pitch = float(d[:, 1].max())
    if pitch > freqs.lambda_min / 4 * (1 + 1e-9):
        log.warning("referenced %s pitch %.4g m exceeds lambda_min/4 = %.4g m",
                    side, pitch, freqs.lambda_min / 4)


def reference_pattern(referenced: ArrayTopology, apodization: str, grid: SamplingGrid,
                      freqs: FrequencyGrid, optimize: str = "rx",
                      apodize_fixed: bool = True,
                      reflectivity: complex = 1.0) -> ReferencePattern:
    """Image of unit point targets on every sampling pixel through the
    apodized referenced array.

    The optimized side always receives the window; the fixed side is tapered
    only when ``apodize_fixed`` is set and only along axes with more than two
    distinct element coordinates.
    """
    _check_nyquist(referenced, optimize, freqs)
    fixed = _other(optimize)
    w_opt = apodize(referenced.positions(optimize), apodization, min_count=1)
    w_opt = referenced.weights(optimize) * w_opt
    w_fix = referenced.weights(fixed)
    if apodize_fixed:
        w_fix = w_fix * apodize(referenced.positions(fixed), apodization, min_count=2)
    weights = {optimize: w_opt, fixed: w_fix}
    ref = referenced.with_weights(tx=weights["tx"], rx=weights["rx"])

    scene = Scene(grid.positions, reflectivity)
    fld = forward_scatter(scene, ref, freqs)
    E_ref = bp_image(fld, ref, grid.image_grid).values
    return ReferencePattern(grid, E_ref, ref, scene, fld, apodization, optimize)


def residual_sq(B, E, w) -> float:
    """``||E - B w||_2^2``."""
    r = np.asarray(E) - np.asarray(B) @ np.asarray(w)
    return float(np.vdot(r, r).real)


def subset_terms(pattern: ReferencePattern, subset):
    """Reference image and sensing matrix of a subset of the reference
    scatterers, built exactly as the full-set quantities are."""
    idx = np.asarray(sorted(subset), dtype=int).reshape(-1)
    Q = len(pattern.scene)
    if idx.size and (idx[0] < 0 or idx[-1] >= Q):
        raise SubsetOutOfRange(f"subset indices must lie in [0, {Q})")
    if np.unique(idx).size != idx.size:
        raise SubsetOutOfRange("subset indices must be unique")
    if idx.size == Q:
        fld = pattern.field
    else:
        fld = forward_scatter(pattern.scene.subset(idx), pattern.referenced,
                              pattern.field.freqs)
    grid = pattern.grid.image_grid
    E_sub = bp_image(fld, pattern.referenced, grid).values
    B_sub = build_sensing_matrix(fld, pattern.fixed_side, pattern.referenced, grid)
    return E_sub, B_sub.entries


def lemma1_check(w, pattern: ReferencePattern, subset) -> float:
    """Residual ``||E'_ref - B' w||^2`` restricted to a subset of reference targets.

    The empty subset gives 0; the full subset reproduces the residual of the
    synthesis program itself.
    """
    w = getattr(w, "w", w)
    idx = list(subset)
    if not idx:
        return 0.0
    E_sub, B_sub = subset_terms(pattern, idx)
    return residual_sq(B_sub, E_sub, w)
