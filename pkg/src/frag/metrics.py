"""Quality metrics that need no learned model.

Pixel values are assumed to lie in [0, 1], so PSNR uses MAX = 1. Identical
inputs give ``math.inf``; JSON output renders it as the string ``"inf"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .apf import band_split
from .tensor_io import check_latents

SSIM_WINDOW = 8
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


@dataclass(frozen=True)
class BandScores:
    low: float
    high: float
    f_cut: float


def _pair(a, b):
    a = np.asarray(check_latents(a, "a"), dtype=np.float64)
    b = np.asarray(check_latents(b, "b"), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse_to_psnr(mse: float) -> float:
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def mse(a, b) -> float:
    a, b = _pair(a, b)
    # flat reduction so masked_psnr with a full mask sums in the same order
    return float(np.mean(((a - b) ** 2).ravel()))


def psnr(a, b) -> float:
    return mse_to_psnr(mse(a, b))


def band_mse(a, b, f_cut: float = 0.25 * math.pi) -> tuple[float, float]:
    """MSE of the low and high band components.

    The two values add up to the full-tensor MSE since the masks are
    complementary.
    """
    a, b = _pair(a, b)
    low_a, high_a = band_split(a, f_cut)
    low_b, high_b = band_split(b, f_cut)
    return float(np.mean((low_a - low_b) ** 2)), float(np.mean((high_a - high_b) ** 2))


def band_psnr(a, b, f_cut: float = 0.25 * math.pi) -> BandScores:
    low, high = band_mse(a, b, f_cut)
    return BandScores(mse_to_psnr(low), mse_to_psnr(high), f_cut)


def _window_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Block means and raw second moments over non-overlapping windows.

    ``x`` has shape ``(L, H, W, C)``; partial windows at the edges are dropped.
    """
    L, H, W, C = x.shape
    k = SSIM_WINDOW
    nh, nw = H // k, W // k
    blocks = x[:, :nh * k, :nw * k, :].reshape(L, nh, k, nw, k, C)
    return blocks, blocks.mean(axis=(2, 4))


def ssim(a, b) -> float:
    """Mean SSIM over 8x8 windows (stride 8), channels and frames.

    Local statistics use uniform weights and population (1/N) variances.
    """
    a, b = _pair(a, b)
    if a.shape[1] < SSIM_WINDOW or a.shape[2] < SSIM_WINDOW:
        raise ValueError(f"frames smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    blocks_a, mu_a = _window_stats(a)
    blocks_b, mu_b = _window_stats(b)
    da = blocks_a - mu_a[:, :, None, :, None, :]
    db = blocks_b - mu_b[:, :, None, :, None, :]
    var_a = (da ** 2).mean(axis=(2, 4))
    var_b = (db ** 2).mean(axis=(2, 4))
    cov = (da * db).mean(axis=(2, 4))
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def masked_psnr(a, b, mask) -> float:
    """PSNR over the pixels where ``mask`` is 1, in every frame and channel."""
    a, b = _pair(a, b)
    mask = np.asarray(mask).astype(bool)
    if mask.shape != a.shape[1:3]:
        raise ValueError(f"mask is {mask.shape}, frames are {a.shape[1:3]}")
    if not mask.any():
        raise ValueError("mask selects no pixels")
    diff = (a - b)[:, mask, :]
    return mse_to_psnr(float(np.mean((diff ** 2).ravel())))


def rect_mask(height: int, width: int, top: int, left: int, bottom: int, right: int,
              keep_inside: bool = False) -> np.ndarray:
    """Rectangular mask; by default the rectangle (the edited area) is zeroed."""
    mask = np.zeros((height, width), dtype=bool)
    mask[top:bottom, left:right] = True
    return mask if keep_inside else ~mask


def frame_consistency(v) -> float:
    """Mean cosine similarity of consecutive flattened frames.

    A model-free stand-in for CLIP frame consistency; values are not
    comparable with CLIP scores.
    """
    v = np.asarray(check_latents(v), dtype=np.float64)
    if v.shape[0] < 2:
        raise ValueError("need at least two frames")
    flat = v.reshape(v.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-norm frame")
    cos = (flat[:-1] * flat[1:]).sum(axis=1) / (norms[:-1] * norms[1:])
    return float(cos.mean())
