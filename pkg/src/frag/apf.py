"""Adaptive frequency pass filter and hard band splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import (forward_spectrum, inverse_spectrum, max_radius,
                       radial_distance)
from .tensor_io import check_latents, write_pgm

DEFAULT_SIGMA = 0.25


@dataclass(frozen=True)
class ApfFilter:
    """Low-pass gain: 1 inside radius ``r``, Gaussian skirt of scale ``sigma`` outside.

    One 2-D gain of shape ``(H, W)`` is shared by every frame and channel.
    """

    r: float
    sigma: float
    width: int
    height: int
    gain: np.ndarray = field(repr=False, compare=False)

    def heatmap(self) -> np.ndarray:
        return np.rint(self.gain * 255).astype(np.uint8)

    def export_heatmap(self, path) -> None:
        write_pgm(self.heatmap(), path)


def filter_gain(d, r: float, sigma: float) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    skirt = np.exp(-((d - r) ** 2) / (2.0 * sigma ** 2))
    return np.where(d <= r, 1.0, skirt)


def build_filter(r: float, sigma: float, width: int, height: int) -> ApfFilter:
    upper = max_radius(height, width)
    if not 0 < r < upper:
        raise ValueError(f"radius {r} outside (0, {upper:.6g})")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    gain = filter_gain(radial_distance(height, width), r, sigma)
    gain.flags.writeable = False
    return ApfFilter(float(r), float(sigma), width, height, gain)


def _check_dims(filt: ApfFilter, z: np.ndarray) -> None:
    if z.shape[1:3] != (filt.height, filt.width):
        raise ValueError(f"filter is {filt.height}x{filt.width}, frames are "
                         f"{z.shape[1]}x{z.shape[2]}")


def apply_filter(filt: ApfFilter, z) -> np.ndarray:
    """Refine ``z`` by multiplying its spectrum with the filter gain."""
    z = check_latents(z)
    _check_dims(filt, z)
    return inverse_spectrum(forward_spectrum(z) * filt.gain[None, :, :, None])


def cutoff_distance(f_cut: float, width: int) -> float:
    return f_cut * (width // 2) / math.pi


def band_masks(f_cut: float, height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < f_cut < math.pi:
        raise ValueError(f"f_cut must lie in (0, pi), got {f_cut}")
    low = radial_distance(height, width) < cutoff_distance(f_cut, width)
    return low, ~low


def band_split(z, f_cut: float = 0.25 * math.pi) -> tuple[np.ndarray, np.ndarray]:
    """Split ``z`` into complementary low/high bands with hard spectral masks.

    ``low + high`` reconstructs ``z`` up to FFT round-off.
    """
    z = check_latents(z)
    low_mask, high_mask = band_masks(f_cut, z.shape[1], z.shape[2])
    spectrum = forward_spectrum(z)
    low = inverse_spectrum(spectrum * low_mask[None, :, :, None])
    high = inverse_spectrum(spectrum * high_mask[None, :, :, None])
    return low, high
