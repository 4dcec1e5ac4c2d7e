"""Per-frame 2-D spectra, differential spectra, spatial moments and radii.

Spectra are complex arrays with the same ``(L, H, W, C)`` layout as the
latents they come from, center-shifted so the DC bin sits at row ``H//2``,
column ``W//2``. Frequency-grid coordinates are ``x = u - W//2`` and
``y = v - H//2`` for column ``u`` and row ``v``.

The forward transform is unnormalized; the inverse carries ``1/(W*H)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .tensor_io import check_latents

_AXES = (1, 2)


class DegenerateSpectrumError(ValueError):
    """The positive frequency quadrant carries no weight."""

    code = "degenerate_moments"


@dataclass(frozen=True)
class MomentPoint:
    mx: float
    my: float

    @property
    def d(self) -> float:
        return math.hypot(self.mx, self.my)


@dataclass(frozen=True)
class RadialProfile:
    """Mean spectral magnitude per normalized-frequency bin.

    Bin ``b`` covers ``[b*pi/n, (b+1)*pi/n)``; the last bin also holds
    ``f = pi`` exactly. Bins with no grid points report 0.
    """

    edges: np.ndarray
    mean_magnitude: np.ndarray
    counts: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.mean_magnitude)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def frequency_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Centered integer frequency coordinates ``(x, y)``, each of shape ``(H, W)``."""
    x = np.arange(width) - width // 2
    y = np.arange(height) - height // 2
    return np.meshgrid(x, y)


def radial_distance(height: int, width: int) -> np.ndarray:
    x, y = frequency_grid(height, width)
    return np.hypot(x, y)


def max_radius(height: int, width: int) -> float:
    """Exclusive upper bound on filter radii: ``sqrt((W/2)^2 + (H/2)^2)``."""
    return math.hypot(width / 2, height / 2)


def forward_spectrum(z) -> np.ndarray:
    z = check_latents(z).astype(np.float64, copy=False)
    return np.fft.fftshift(scipy.fft.fft2(z, axes=_AXES), axes=_AXES)


def inverse_spectrum(spectrum) -> np.ndarray:
    """Inverse of :func:`forward_spectrum`; the imaginary residue is dropped."""
    spectrum = np.asarray(spectrum)
    if spectrum.ndim != 4:
        raise ValueError(f"spectrum must be 4-D, got shape {spectrum.shape}")
    return scipy.fft.ifft2(np.fft.ifftshift(spectrum, axes=_AXES), axes=_AXES).real


def differential_spectrum(current, previous) -> np.ndarray:
    """Bin-wise difference between this step's spectrum and the previous step's."""
    current = np.asarray(current)
    previous = np.asarray(previous)
    if current.shape != previous.shape:
        raise ValueError(f"spectrum shapes differ: {current.shape} vs {previous.shape}")
    return current - previous


def spatial_moments(diff, rtol: float = 1e-12) -> MomentPoint:
    """Magnitude-weighted centroid of the differential spectrum.

    Magnitudes are averaged over frames and channels, then only bins with
    ``x > 0`` and ``y > 0`` contribute. If that quadrant holds less than
    ``rtol`` of the whole spectrum's weight (round-off only), the
    centroid is undefined and :class:`DegenerateSpectrumError` is raised.
    """
    diff = np.asarray(diff)
    if diff.ndim != 4:
        raise ValueError(f"differential spectrum must be 4-D, got {diff.shape}")
    weight = np.abs(diff).mean(axis=(0, 3))
    x, y = frequency_grid(*weight.shape)
    quadrant = (x > 0) & (y > 0)
    w = weight[quadrant]
    total = w.sum()
    if not total > rtol * weight.sum() or total == 0:
        raise DegenerateSpectrumError("no spectral weight in the positive quadrant")
    return MomentPoint(float((x[quadrant] * w).sum() / total),
                       float((y[quadrant] * w).sum() / total))


def adapted_radius(moment: MomentPoint | None, d0: float, height: int, width: int) -> float:
    """Filter radius ``d(M) + d0`` kept inside the open interval ``(0, r_max)``.

    ``moment=None`` (no previous step, or degenerate moments) gives ``d0``.
    """
    if d0 < 0:
        raise ValueError(f"margin d0 must be >= 0, got {d0}")
    r = d0 if moment is None else moment.d + d0
    upper = max_radius(height, width)
    return float(min(max(r, np.nextafter(0.0, 1.0)), np.nextafter(upper, 0.0)))


def normalized_frequency(height: int, width: int) -> np.ndarray:
    """``f = pi * d / (W//2)`` per bin, so the axis Nyquist bin maps to pi."""
    return math.pi * radial_distance(height, width) / (width // 2)


def radial_profile(spectrum, n_bins: int) -> RadialProfile:
    spectrum = np.asarray(spectrum)
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    _, height, width, _ = spectrum.shape
    if height != width:
        raise ValueError(f"radial profile needs square frames, got {height}x{width}")
    f = normalized_frequency(height, width)
    mag = np.abs(spectrum).mean(axis=(0, 3))
    idx = np.floor(f / math.pi * n_bins).astype(int)
    idx[np.isclose(f, math.pi)] = n_bins - 1
    inside = idx < n_bins
    counts = np.bincount(idx[inside], minlength=n_bins)
    sums = np.bincount(idx[inside], weights=mag[inside], minlength=n_bins)
    means = np.divide(sums, counts, out=np.zeros(n_bins), where=counts > 0)
    return RadialProfile(np.linspace(0.0, math.pi, n_bins + 1), means, counts)


def band_energy_fraction(z, f_cut: float) -> float:
    """Share of spectral energy (|S|^2) at normalized frequency below ``f_cut``."""
    power = np.abs(forward_spectrum(z)) ** 2
    _, height, width, _ = power.shape
    low = normalized_frequency(height, width) < f_cut
    return float(power[:, low, :].sum() / power.sum())
