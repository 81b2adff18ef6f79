"""Image-quality metrics on normalized, dB-clipped magnitude maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import FlatImage, GridMismatch
from .imaging import ImageField

PSNR_CAP = 99.0
PEAK = 255.0
SSIM_WINDOW = 8
K1, K2 = 0.01, 0.03


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    psnr: float
    ssim: float
    entropy: Optional[float] = None

    def as_dict(self) -> dict:
        return {"rmse": self.rmse, "psnr_db": self.psnr, "ssim": self.ssim,
                "entropy_bits": self.entropy}


def db_map(image: ImageField, dynamic_range: float = 15.0) -> np.ndarray:
    """Map ``|E|`` to [0, 255]: 0 dB -> 255, ``-dynamic_range`` dB and below -> 0.

    Returned with the image's 2-D shape when it has rectangular metadata.
    """
    mag = np.abs(image.values)
    top = mag.max()
    if not top > 0:
        raise FlatImage("image is identically zero")
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(mag / top)
    db = np.clip(db, -dynamic_range, 0.0)
    out = (db + dynamic_range) * (PEAK / dynamic_range)
    if image.grid.rect is not None:
        out = out.reshape(image.grid.rect.n_z, image.grid.rect.n_x)
    return out


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(err: float) -> float:
    if err < PEAK * 10 ** (-PSNR_CAP / 20):
        return PSNR_CAP
    return float(20 * np.log10(PEAK / err))


def ssim(a: np.ndarray, b: np.ndarray, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over all ``window`` x ``window`` patches (uniform weights).

    Axes shorter than ``window`` use their full length.
    """
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    win = (min(window, a.shape[0]), min(window, a.shape[1]))
    pa = sliding_window_view(a, win)
    pb = sliding_window_view(b, win)
    axes = (-2, -1)
    mu_a = pa.mean(axis=axes)
    mu_b = pb.mean(axis=axes)
    var_a = ((pa - mu_a[..., None, None]) ** 2).mean(axis=axes)
    var_b = ((pb - mu_b[..., None, None]) ** 2).mean(axis=axes)
    cov = ((pa - mu_a[..., None, None]) * (pb - mu_b[..., None, None])).mean(axis=axes)
    c1 = (K1 * PEAK) ** 2
    c2 = (K2 * PEAK) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def compare_images(test: ImageField, baseline: ImageField,
                   dynamic_range: float = 15.0) -> MetricsReport:
    """RMSE, PSNR and SSIM of ``test`` against ``baseline`` on the 0-255 scale."""
    if len(test.grid) != len(baseline.grid) or not np.allclose(
            test.grid.positions, baseline.grid.positions, rtol=0, atol=1e-12):
        raise GridMismatch("images live on different grids")
    a = db_map(test, dynamic_range)
    b = db_map(baseline, dynamic_range)
    err = rmse(a, b)
    return MetricsReport(err, psnr(err), ssim(a, b))


def histogram_entropy(values: np.ndarray, bins: int = 256) -> float:
    """Shannon entropy (bits) of a histogram of ``values`` over [0, 255]."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    counts, _ = np.histogram(np.ravel(values), bins=bins, range=(0.0, PEAK))
    p = counts[counts > 0] / counts.sum()
    return float(max(0.0, -np.sum(p * np.log2(p))))


def image_entropy(image: ImageField, bins: int = 256,
                  dynamic_range: float = 15.0) -> float:
    """Entropy of the whole-image histogram of the normalized dB map.

    An all-zero image has entropy 0.
    """
    try:
        values = db_map(image, dynamic_range)
    except FlatImage:
        return 0.0
    return histogram_entropy(values, bins)


def full_report(test: ImageField, baseline: ImageField, dynamic_range: float = 15.0,
                bins: int = 256) -> MetricsReport:
    rep = compare_images(test, baseline, dynamic_range)
    return MetricsReport(rep.rmse, rep.psnr, rep.ssim,
                         image_entropy(test, bins, dynamic_range))
