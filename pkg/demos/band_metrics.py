"""
Scoring low and high frequencies separately
===========================================

Blur mostly damages the high band; a global brightness shift mostly damages
the low band. Band PSNR tells the two apart where plain PSNR cannot.
"""

import numpy as np

from frag.apf import apply_filter, build_filter
from frag.metrics import band_psnr, psnr, ssim
from frag.simulate import make_test_video

video = make_test_video("moving-edge", L=8, W=64, H=64, C=3, seed=1)

blurred = np.clip(apply_filter(build_filter(6.0, 1.0, 64, 64), video), 0, 1)
shifted = np.clip(video + 0.04, 0, 1)

for name, other in (("blurred", blurred), ("shifted", shifted)):
    b = band_psnr(video, other)
    print(f"{name:8s} PSNR {psnr(video, other):6.2f}  low {b.low:6.2f}  high {b.high:6.2f}  "
          f"SSIM {ssim(video, other):.3f}")
