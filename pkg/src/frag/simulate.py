"""Synthetic denoising trajectories with a planted spectral schedule.

A trajectory reveals a clean video ``x0`` from low to high frequency::

    z_t = lowpass(x0, r*(t)) + eta(t) * noise(seed, t)

with ``r*(t) = r_min + (r_max - r_min) * (1 - t/T)**p`` and
``eta(t) = eta_max * (t/T)**decay``. ``lowpass`` keeps bins with
``d <= r*`` exactly. Noise is standard normal from numpy's PCG64 generator
seeded with ``SeedSequence([seed, 1, t])``, so each step is reproducible
on its own; procedural content uses ``SeedSequence([seed, 0])``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import forward_spectrum, inverse_spectrum, max_radius, radial_distance

PATTERNS = ("moving-edge", "smooth-gradient", "two-scene", "texture")


def default_steps(T: int = 1000, n_steps: int = 50, stride: int = 20) -> tuple[int, ...]:
    """DDIM-style descending step list starting at ``T - 1``."""
    steps = tuple(T - 1 - stride * k for k in range(n_steps))
    if steps[-1] < 0:
        raise ValueError(f"{n_steps} steps of stride {stride} do not fit below T={T}")
    return steps


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))


def _grid(height: int, width: int):
    y, x = np.mgrid[0:height, 0:width]
    return x.astype(np.float64), y.astype(np.float64)


def _smooth_gradient(L, W, H, C, rng):
    # integer wave vectors strictly inside f < 0.25*pi keep every component in the low band
    limit = W / 8
    waves = [(kx, ky) for kx in range(0, W // 2) for ky in range(-(H // 2), H // 2)
             if 0 < math.hypot(kx, ky) < limit and (kx > 0 or ky > 0)]
    waves = sorted(waves, key=lambda k: (math.hypot(*k), k))[:4]
    x, y = _grid(H, W)
    out = np.full((L, H, W, C), 0.5)
    for c in range(C):
        for kx, ky in waves:
            amp = rng.uniform(0.05, 0.1)
            phase = rng.uniform(0, 2 * math.pi)
            drift = rng.uniform(-0.2, 0.2)
            for l in range(L):
                arg = 2 * math.pi * (kx * x / W + ky * y / H) + phase + drift * l
                out[l, :, :, c] += amp * np.cos(arg)
        if not waves:
            out[:, :, :, c] += 0.1 * np.sin(rng.uniform(0, 2 * math.pi) + 0.2 * np.arange(L))[:, None, None]
    return out


def _moving_edge(L, W, H, C, rng):
    theta = rng.uniform(math.radians(20), math.radians(70))
    start = rng.uniform(-0.25, 0.0) * min(W, H)
    speed = rng.uniform(0.5, 1.5)
    levels = rng.uniform(0.1, 0.9, size=(C, 2))
    x, y = _grid(H, W)
    s = (x - W / 2) * math.cos(theta) + (y - H / 2) * math.sin(theta)
    out = np.empty((L, H, W, C))
    for l in range(L):
        side = s < start + speed * l
        for c in range(C):
            out[l, :, :, c] = np.where(side, levels[c, 0], levels[c, 1])
    return out


def _texture(H, W, C, rng, amplitude):
    """Random-phase field with flat spectral magnitude, zero mean."""
    field_ = rng.standard_normal((1, H, W, C))
    spectrum = forward_spectrum(field_)
    mag = np.abs(spectrum)
    spectrum = np.divide(spectrum, mag, out=np.zeros_like(spectrum), where=mag > 0)
    spectrum[:, H // 2, W // 2, :] = 0.0
    tex = inverse_spectrum(spectrum)[0]
    return amplitude * tex / tex.std()


def _two_scene(L, W, H, C, rng):
    x, y = _grid(H, W)
    cut = L // 2
    out = np.empty((L, H, W, C))
    phase = rng.uniform(0, 2 * math.pi, size=C)
    fine = _texture(H, W, C, rng, 0.05)
    # per-frame brightness flicker gives frames within a scene distinct pooled features
    flicker = 0.02 * rng.standard_normal((L, C))
    for l in range(L):
        for c in range(C):
            if l < cut:
                out[l, :, :, c] = (0.3 + flicker[l, c]
                                   + 0.1 * np.cos(2 * math.pi * x / W + phase[c] + 0.05 * l))
            else:
                out[l, :, :, c] = (0.65 + flicker[l, c] + fine[:, :, c]
                                   + 0.1 * np.cos(2 * math.pi * y / H + phase[c] + 0.05 * l))
    return out


def _drifting_texture(L, W, H, C, rng):
    base = _texture(H, W, C, rng, 0.12)
    shifts = np.cumsum(rng.integers(-1, 2, size=(L, 2)), axis=0)
    out = np.empty((L, H, W, C))
    for l in range(L):
        out[l] = 0.5 + np.roll(base, tuple(shifts[l]), axis=(0, 1))
    return out


def make_test_video(pattern: str, L: int = 48, W: int = 64, H: int = 64, C: int = 4,
                    seed: int = 0) -> np.ndarray:
    """Deterministic procedural video of shape ``(L, H, W, C)``, values in [0, 1].

    ``moving-edge``: a tilted sharp edge sliding across the frame (broadband).
    ``smooth-gradient``: a few slow cosines, all below f = 0.25*pi.
    ``two-scene``: one coarse pattern for the first half, a brighter one
    plus fine texture for the second half.
    ``texture``: a flat-spectrum random texture drifting by whole pixels.
    """
    if min(L, W, H, C) < 1:
        raise ValueError(f"invalid dimensions L={L} W={W} H={H} C={C}")
    rng = _rng(seed, 0)
    makers = {
        "moving-edge": _moving_edge,
        "smooth-gradient": _smooth_gradient,
        "two-scene": _two_scene,
        "texture": _drifting_texture,
    }
    if pattern not in makers:
        raise ValueError(f"unknown pattern {pattern!r}; choose from {', '.join(PATTERNS)}")
    return np.clip(makers[pattern](L, W, H, C, rng), 0.0, 1.0)


@dataclass(frozen=True)
class TrajectorySpec:
    pattern: str = "texture"
    L: int = 48
    W: int = 64
    H: int = 64
    C: int = 4
    steps: tuple[int, ...] = field(default_factory=default_steps)
    T: int = 1000
    r_min: float = 2.0
    r_max: float = 45.0
    exponent: float = 1.0
    eta_max: float = 1e-4
    eta_decay: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(int(t) for t in self.steps))
        steps = self.steps
        if not steps:
            raise ValueError("empty step list")
        if any(a <= b for a, b in zip(steps, steps[1:])):
            raise ValueError("step list must be strictly descending")
        if steps[0] > self.T - 1 or steps[-1] < 0:
            raise ValueError(f"steps must lie in [0, {self.T - 1}]")
        upper = max_radius(self.H, self.W)
        if not 0 <= self.r_min < self.r_max < upper:
            raise ValueError(f"need 0 <= r_min < r_max < {upper:.6g}")
        if self.exponent <= 0 or self.eta_max < 0 or self.eta_decay < 0:
            raise ValueError("exponent must be > 0, eta_max and eta_decay >= 0")

    def planted_radius(self, t: int) -> float:
        return self.r_min + (self.r_max - self.r_min) * (1.0 - t / self.T) ** self.exponent

    def noise_level(self, t: int) -> float:
        return self.eta_max * (t / self.T) ** self.eta_decay

    def to_dict(self) -> dict:
        d = asdict(self)
        d["steps"] = list(self.steps)
        return d


@dataclass(frozen=True)
class Trajectory:
    spec: TrajectorySpec
    x0: np.ndarray = field(repr=False)
    steps: tuple[int, ...]
    latents: tuple[np.ndarray, ...] = field(repr=False)
    planted: tuple[float, ...]

    def __iter__(self):
        return iter(zip(self.steps, self.latents))

    def __len__(self):
        return len(self.steps)


def hard_lowpass(x, radius: float, spectrum=None) -> np.ndarray:
    """Keep spectral bins with ``d <= radius``; returns a copy of ``x`` when nothing is cut.

    Pass ``spectrum`` (the forward spectrum of ``x``) to skip recomputing it.
    """
    x = np.asarray(x, dtype=np.float64)
    keep = radial_distance(x.shape[1], x.shape[2]) <= radius
    if keep.all():
        return x.copy()
    if spectrum is None:
        spectrum = forward_spectrum(x)
    return inverse_spectrum(spectrum * keep[None, :, :, None])


def synth_trajectory(spec: TrajectorySpec = TrajectorySpec(), x0=None) -> Trajectory:
    if x0 is None:
        x0 = make_test_video(spec.pattern, spec.L, spec.W, spec.H, spec.C, spec.seed)
    else:
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (spec.L, spec.H, spec.W, spec.C):
            raise ValueError(f"x0 shape {x0.shape} does not match the trajectory shape")
    spectrum = forward_spectrum(x0)
    latents = []
    planted = []
    for t in spec.steps:
        r = spec.planted_radius(t)
        z = hard_lowpass(x0, r, spectrum)
        eta = spec.noise_level(t)
        if eta > 0:
            z = z + eta * _rng(spec.seed, 1, t).standard_normal(z.shape)
        latents.append(z)
        planted.append(r)
    return Trajectory(spec, x0, spec.steps, tuple(latents), tuple(planted))
