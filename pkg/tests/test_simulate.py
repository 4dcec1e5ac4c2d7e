import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from frag.apf import band_masks
from frag.grouping import SchedulerConfig, frag_step
from frag.simulate import (PATTERNS, TrajectorySpec, default_steps, hard_lowpass,
                           make_test_video, synth_trajectory)
from frag.spectral import forward_spectrum, radial_profile


def test_default_steps():
    steps = default_steps()
    assert len(steps) == 50
    assert steps[0] == 999 and steps[-1] == 19
    assert all(a - b == 20 for a, b in zip(steps, steps[1:]))
    with pytest.raises(ValueError):
        default_steps(n_steps=51)


@pytest.mark.parametrize("pattern", PATTERNS)
def test_patterns_are_deterministic_and_bounded(pattern):
    a = make_test_video(pattern, L=6, W=16, H=12, C=2, seed=3)
    b = make_test_video(pattern, L=6, W=16, H=12, C=2, seed=3)
    assert a.shape == (6, 12, 16, 2)
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0 and a.max() <= 1
    assert not np.array_equal(a, make_test_video(pattern, L=6, W=16, H=12, C=2, seed=4))


def test_unknown_pattern():
    with pytest.raises(ValueError):
        make_test_video("noise")


@pytest.mark.parametrize("seed", range(3))
def test_smooth_gradient_is_low_band(seed):
    v = make_test_video("smooth-gradient", seed=seed)
    energy = np.abs(forward_spectrum(v)) ** 2
    low, _ = band_masks(0.25 * math.pi, 64, 64)
    assert energy[:, low, :].sum() / energy.sum() >= 0.99
    # also without the DC term, which would make the check trivial
    energy[:, 32, 32, :] = 0
    assert energy[:, low, :].sum() / energy.sum() >= 0.99


@pytest.mark.parametrize("seed", range(3))
def test_moving_edge_is_broadband(seed):
    p = radial_profile(forward_spectrum(make_test_video("moving-edge", seed=seed)), 16)
    assert np.all(p.mean_magnitude > 1e-6 * p.mean_magnitude.sum())


def test_spec_validation():
    with pytest.raises(ValueError):
        TrajectorySpec(steps=(10, 20))
    with pytest.raises(ValueError):
        TrajectorySpec(steps=(1000,))
    with pytest.raises(ValueError):
        TrajectorySpec(r_min=10, r_max=5)
    with pytest.raises(ValueError):
        TrajectorySpec(r_max=46)
    with pytest.raises(ValueError):
        TrajectorySpec(steps=())


def test_planted_curves():
    spec = TrajectorySpec()
    t = spec.steps[0]
    assert spec.planted_radius(t) == pytest.approx(2 + 43 * (1 - t / 1000))
    r = [spec.planted_radius(t) for t in range(1000)]
    eta = [spec.noise_level(t) for t in range(1000)]
    assert all(a >= b for a, b in zip(r, r[1:]))
    assert all(a <= b for a, b in zip(eta, eta[1:]))


def test_final_step_recovers_clean_video():
    spec = TrajectorySpec(pattern="moving-edge", L=3, W=15, H=15, C=1, steps=(500, 0),
                          r_max=10.0, eta_max=0.0)
    traj = synth_trajectory(spec)
    np.testing.assert_array_equal(traj.latents[-1], traj.x0)
    assert traj.planted == (spec.planted_radius(500), 10.0)


def test_trajectory_is_reproducible():
    spec = TrajectorySpec(L=4, W=16, H=16, C=2, steps=(999, 500, 10), r_max=10.0,
                          eta_max=0.01, seed=9)
    a, b = synth_trajectory(spec), synth_trajectory(spec)
    for x, y in zip(a.latents, b.latents):
        assert x.tobytes() == y.tobytes()
    assert [t for t, _ in a] == [999, 500, 10]


def test_hard_lowpass_keeps_only_inner_bins(rng):
    x = rng.standard_normal((2, 16, 16, 1))
    out = hard_lowpass(x, 3.0)
    S = forward_spectrum(out)[0, :, :, 0]
    yy, xx = np.mgrid[-8:8, -8:8]
    assert np.abs(S[np.hypot(xx, yy) > 3.0]).max() < 1e-9
    np.testing.assert_allclose(hard_lowpass(x, 100.0), x)


def test_estimated_radius_tracks_planted_curve():
    spec = TrajectorySpec(L=16, W=64, H=64, C=2, steps=default_steps()[::3])
    traj = synth_trajectory(spec)
    radii = []
    prev = None
    for t, z in traj:
        radii.append(frag_step(z, prev, t, SchedulerConfig()).radius)
        prev = z
    estimated = radii[1:]
    assert spearmanr(estimated, traj.planted[1:]).statistic >= 0.9
    assert max(a - b for a, b in zip(estimated, estimated[1:])) <= 2.0
