"""
Temporal groups over the course of denoising
============================================

Early in denoising only a coarse version of the video exists, so frames are
grouped broadly. Towards the end the scheduler cuts the merge tree lower and
groups become small.
"""

from frag.grouping import SchedulerConfig, as_ranges, frag_step
from frag.simulate import TrajectorySpec, synth_trajectory

spec = TrajectorySpec(pattern="two-scene", L=24)
traj = synth_trajectory(spec)
cfg = SchedulerConfig(min_group=2)

prev = None
for t, z in traj:
    rec = frag_step(z, prev, t, cfg)
    prev = z
    if t % 200 == 199 or t == traj.steps[-1]:
        print(f"t={t:3d}  n_cut={rec.n_cut:2d}  groups={len(rec.groups):2d}  "
              f"{as_ranges(rec.groups)}")

###############################################################################
# The scene change sits at frame 12; at the first step the two groups split
# exactly there.
