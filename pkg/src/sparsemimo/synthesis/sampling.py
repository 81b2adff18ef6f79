"""Resolution estimates and the sampling grid used for synthesis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import SynthError
from ..imaging import ImageGrid
from ..model import ArrayTopology, FrequencyGrid


@dataclass(frozen=True)
class ResolutionSpec:
    """Effective angles (radians) per axis and side, center wavelength and
    region extents.

    Each angle is the smaller of the aperture-subtended angle and the element
    beamwidth.  A zero angle is allowed for a side with no extent along an
    axis (a horizontal line has none along z) as long as the two sides of that
    axis do not both vanish while the region has extent there.
    """

    theta_x_tx: float
    theta_x_rx: float
    theta_z_tx: float
    theta_z_rx: float
    lambda_c: float
    D_x: float
    D_z: float

    def __post_init__(self):
        for name in ("theta_x_tx", "theta_x_rx", "theta_z_tx", "theta_z_rx"):
            v = getattr(self, name)
            if not 0 <= v <= np.pi:
                raise SynthError(f"{name} must lie in [0, pi], got {v}")
        if not self.lambda_c > 0:
            raise SynthError("lambda_c must be positive")
        if self.D_x < 0 or self.D_z < 0 or self.D_x + self.D_z == 0:
            raise SynthError("region extents must be >= 0 and not both zero")
        if self.D_x > 0 and self.theta_x_tx + self.theta_x_rx == 0:
            raise SynthError("no angular extent along x")
        if self.D_z > 0 and self.theta_z_tx + self.theta_z_rx == 0:
            raise SynthError("no angular extent along z")

    @classmethod
    def from_geometry(cls, topology: ArrayTopology, R0: float, freqs: FrequencyGrid,
                      D_x: float, D_z: float, beamwidth_x: Optional[float] = None,
                      beamwidth_z: Optional[float] = None) -> "ResolutionSpec":
        """Angles subtended at range ``R0`` by each side's aperture, clamped
        by the element beamwidths when given."""
        def angle(pos, axis, beamwidth):
            extent = float(np.ptp(pos[:, axis])) if pos.shape[0] > 1 else 0.0
            theta = 2 * np.arctan(extent / (2 * R0))
            return min(theta, beamwidth) if beamwidth is not None else theta

        return cls(
            angle(topology.tx_positions, 0, beamwidth_x),
            angle(topology.rx_positions, 0, beamwidth_x),
            angle(topology.tx_positions, 2, beamwidth_z),
            angle(topology.rx_positions, 2, beamwidth_z),
            freqs.lambda_center, D_x, D_z)


def _delta(lam, theta_t, theta_r):
    s = np.sin(theta_t / 2) + np.sin(theta_r / 2)
    return lam / (2 * s) if s > 0 else float("inf")


def resolution(spec: ResolutionSpec):
    """Cross-range resolutions ``(delta_x, delta_z)`` in meters.

    ``delta = lambda_c / (2 (sin(theta_tx/2) + sin(theta_rx/2)))`` per axis;
    infinite along an axis with no angular extent.
    """
    return (_delta(spec.lambda_c, spec.theta_x_tx, spec.theta_x_rx),
            _delta(spec.lambda_c, spec.theta_z_tx, spec.theta_z_rx))


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    M_x: int
    M_z: int
    delta_x: float
    delta_z: float
    image_grid: ImageGrid

    @property
    def M(self) -> int:
        return self.M_x * self.M_z

    @property
    def positions(self) -> np.ndarray:
        return self.image_grid.positions


def min_samples(D: float, delta: float) -> int:
    if D == 0 or not np.isfinite(delta):
        return 1
    # guard exact ratios such as D == delta against float noise
    return int(np.floor(D / delta * (1 + 1e-12))) + 1


def sampling_grid(spec: ResolutionSpec, R0: float, x_c: float = 0.0,
                  z_c: float = 0.0) -> SamplingGrid:
    """Smallest admissible sampling grid: ``floor(D/delta) + 1`` points per
    axis, spaced by the resolution and centered on the region."""
    dx, dz = resolution(spec)
    m_x = min_samples(spec.D_x, dx)
    m_z = min_samples(spec.D_z, dz)
    px = dx if m_x > 1 else 0.0
    pz = dz if m_z > 1 else 0.0
    grid = ImageGrid.rectangular(x_c - 0.5 * (m_x - 1) * px, px, m_x,
                                 z_c - 0.5 * (m_z - 1) * pz, pz, m_z, R0)
    return SamplingGrid(m_x, m_z, dx, dz, grid)
