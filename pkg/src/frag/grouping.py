"""Temporal grouping: frame distances, min-linkage clustering, the cut-rank
scheduler and tree cutting.

Groups are tuples of sorted frame indices, listed in order of their first
frame. With the default contiguity constraint every group is an index
interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .apf import DEFAULT_SIGMA, build_filter
from .spectral import (DegenerateSpectrumError, MomentPoint, adapted_radius,
                       differential_spectrum, forward_spectrum, inverse_spectrum,
                       spatial_moments)
from .tensor_io import check_latents

Groups = tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class Merge:
    """One agglomeration step.

    ``linkage`` is the min-linkage distance between the two clusters when
    they merged. ``height`` is the running maximum of ``linkage`` over
    ranks ``1..rank``; under the contiguity constraint raw linkages can
    dip after a merge brings non-adjacent frames next to each other, so
    ``height`` is the monotone dendrogram coordinate.
    """

    rank: int
    left: tuple[int, ...]
    right: tuple[int, ...]
    linkage: float
    height: float

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(sorted(self.left + self.right))


@dataclass(frozen=True)
class MergeTree:
    n_leaves: int
    merges: tuple[Merge, ...]
    distances: np.ndarray
    contiguous: bool = True

    @property
    def n_root(self) -> int:
        return self.n_leaves - 1

    def partition(self, n_cut: int) -> Groups:
        """Clusters left after applying only the merges ranked below ``n_cut``."""
        if not 1 <= n_cut <= max(self.n_root, 1):
            raise ValueError(f"n_cut must be in [1, {self.n_root}], got {n_cut}")
        parent = list(range(self.n_leaves))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for merge in self.merges[:n_cut - 1]:
            a, b = find(merge.left[0]), find(merge.right[0])
            parent[max(a, b)] = min(a, b)
        clusters: dict[int, list[int]] = {}
        for i in range(self.n_leaves):
            clusters.setdefault(find(i), []).append(i)
        return tuple(sorted(tuple(c) for c in clusters.values()))


@dataclass(frozen=True)
class SchedulerConfig:
    T: int = 1000
    n_root: int | None = None
    min_group: int = 2
    d0: float = 6.0
    sigma: float = DEFAULT_SIGMA
    contiguous: bool = True

    def __post_init__(self):
        if self.T < 2:
            raise ValueError(f"T must be >= 2, got {self.T}")
        if self.min_group < 1:
            raise ValueError(f"min_group must be >= 1, got {self.min_group}")
        if self.n_root is not None and self.n_root < 1:
            raise ValueError(f"n_root must be >= 1, got {self.n_root}")
        if self.d0 < 0:
            raise ValueError(f"d0 must be >= 0, got {self.d0}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class StepRecord:
    t: int
    radius: float
    moment: MomentPoint | None
    n_cut: int
    groups: Groups


def pooled_features(h) -> np.ndarray:
    """Spatially mean-pooled frame vectors, shape ``(L, C)``."""
    h = np.asarray(h, dtype=np.float64)
    return h.mean(axis=(1, 2))


def frame_distance(frame_a, frame_b) -> float:
    """Euclidean distance between the channel-wise spatial means of two frames."""
    frame_a = np.asarray(frame_a, dtype=np.float64)
    frame_b = np.asarray(frame_b, dtype=np.float64)
    if frame_a.shape != frame_b.shape:
        raise ValueError(f"frame shapes differ: {frame_a.shape} vs {frame_b.shape}")
    pa = frame_a.reshape(-1, frame_a.shape[-1]).mean(axis=0)
    pb = frame_b.reshape(-1, frame_b.shape[-1]).mean(axis=0)
    return float(np.linalg.norm(pa - pb))


def distance_matrix(h) -> np.ndarray:
    pooled = pooled_features(h)
    diff = pooled[:, None, :] - pooled[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def merge_tree_from_distances(distances, contiguous: bool = True) -> MergeTree:
    """Agglomerate frames bottom-up under min-linkage.

    With ``contiguous`` only temporally adjacent clusters may merge. Ties
    in linkage go to the pair whose left cluster starts at the smaller
    frame index (then the right cluster's start).
    """
    distances = np.asarray(distances, dtype=np.float64)
    n = distances.shape[0]
    if distances.shape != (n, n):
        raise ValueError(f"distance matrix must be square, got {distances.shape}")
    if n < 2:
        raise ValueError("need at least two frames to build a merge tree")

    clusters = [(i,) for i in range(n)]
    link = distances.copy()
    merges = []
    height = -math.inf
    for rank in range(1, n):
        k = len(clusters)
        if contiguous:
            pairs = [(i, i + 1) for i in range(k - 1)]
        else:
            pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
        i, j = min(pairs, key=lambda p: (link[p], clusters[p[0]][0], clusters[p[1]][0]))
        value = float(link[i, j])
        height = max(height, value)
        merges.append(Merge(rank, clusters[i], clusters[j], value, height))
        # single-linkage update: distance to the union is the smaller of the two
        merged_row = np.minimum(link[i], link[j])
        link[i, :] = merged_row
        link[:, i] = merged_row
        link[i, i] = 0.0
        link = np.delete(np.delete(link, j, axis=0), j, axis=1)
        clusters[i] = tuple(sorted(clusters[i] + clusters[j]))
        del clusters[j]
    return MergeTree(n, tuple(merges), distances, contiguous)


def build_merge_tree(h, contiguous: bool = True) -> MergeTree:
    h = check_latents(h, "refined latents")
    if h.shape[0] < 2:
        raise ValueError("need at least two frames to build a merge tree")
    return merge_tree_from_distances(distance_matrix(h), contiguous)


def schedule_cut_rank(t: int, n_root: int, T: int = 1000) -> int:
    """Cut rank for denoising step ``t``.

    ``ceil(n_root * (1 - log(T - t) / log(T - 1)))`` clamped to
    ``[1, n_root]``: the root rank at ``t = T-1``, falling towards 1 as
    denoising approaches ``t = 0``.
    """
    if not 0 <= t <= T - 1:
        raise ValueError(f"step {t} outside [0, {T - 1}]")
    if n_root < 1:
        raise ValueError(f"n_root must be >= 1, got {n_root}")
    if t == T - 1:
        return n_root
    if T == 2:
        return 1
    alpha = -1.0 / math.log(T - 1)
    n_cut = math.ceil(n_root * (alpha * math.log(T - t) + 1.0))
    return min(max(n_cut, 1), n_root)


def _linkage(distances: np.ndarray, a, b) -> float:
    return float(distances[np.ix_(a, b)].min())


def enforce_min_group(groups: Groups, distances, min_group: int,
                      contiguous: bool = True) -> Groups:
    """Fold groups smaller than ``min_group`` into neighbouring groups.

    Each undersized group considers its adjacent groups (any other group
    when not contiguous), preferring neighbours that are undersized too.
    Among all such candidate pairs the one with the smallest min-linkage
    merges first; ties go to the leftmost pair. Repeats until every group
    is large enough or one group remains.
    """
    groups = [tuple(g) for g in groups]
    distances = np.asarray(distances)
    while len(groups) > 1:
        best = None
        for i, g in enumerate(groups):
            if len(g) >= min_group:
                continue
            if contiguous:
                near = [j for j in (i - 1, i + 1) if 0 <= j < len(groups)]
            else:
                near = [j for j in range(len(groups)) if j != i]
            small = [j for j in near if len(groups[j]) < min_group]
            for j in small or near:
                key = (not small, _linkage(distances, g, groups[j]), min(i, j), max(i, j))
                if best is None or key < best:
                    best = key
        if best is None:
            break
        i, j = best[2], best[3]
        groups[i] = tuple(sorted(groups[i] + groups[j]))
        del groups[j]
        groups.sort()
    return tuple(groups)


def cut_tree(tree: MergeTree, n_cut: int, min_group: int = 1) -> Groups:
    """Temporal groups after dropping every merge of rank ``>= n_cut``."""
    if not 1 <= min_group <= tree.n_leaves:
        raise ValueError(f"min_group must be in [1, {tree.n_leaves}], got {min_group}")
    groups = tree.partition(n_cut)
    return enforce_min_group(groups, tree.distances, min_group, tree.contiguous)


def frag_step(z_t, z_prev, t: int, cfg: SchedulerConfig = SchedulerConfig(), *,
              spectrum=None, prev_spectrum=None) -> StepRecord:
    """One pass of the pipeline for denoising step ``t``.

    ``z_prev`` is the latent from the preceding (larger-t) step, or None on
    the first step, in which case the radius falls back to ``cfg.d0``. The
    same fallback applies when the differential spectrum has no weight in
    the positive quadrant. Callers holding forward spectra of either
    latent may pass them to avoid recomputation.
    """
    z_t = check_latents(z_t)
    frames, height, width, _ = z_t.shape
    if frames < 2:
        raise ValueError("temporal grouping needs at least two frames")
    if not cfg.min_group <= frames:
        raise ValueError(f"min_group {cfg.min_group} exceeds frame count {frames}")

    if spectrum is None:
        spectrum = forward_spectrum(z_t)
    moment = None
    if z_prev is not None or prev_spectrum is not None:
        if prev_spectrum is None:
            prev_spectrum = forward_spectrum(check_latents(z_prev))
        try:
            moment = spatial_moments(differential_spectrum(spectrum, prev_spectrum))
        except DegenerateSpectrumError:
            moment = None
    radius = adapted_radius(moment, cfg.d0, height, width)

    filt = build_filter(radius, cfg.sigma, width, height)
    # same as apply_filter(filt, z_t), reusing the spectrum computed above
    refined = inverse_spectrum(spectrum * filt.gain[None, :, :, None])
    tree = build_merge_tree(refined, cfg.contiguous)
    n_root = tree.n_root if cfg.n_root is None else min(cfg.n_root, tree.n_root)
    n_cut = schedule_cut_rank(t, n_root, cfg.T)
    groups = cut_tree(tree, n_cut, cfg.min_group)
    return StepRecord(int(t), radius, moment, n_cut, groups)


def is_valid_partition(groups: Groups, n_frames: int, min_group: int = 1,
                       contiguous: bool = True) -> bool:
    members = [i for g in groups for i in g]
    if sorted(members) != list(range(n_frames)):
        return False
    if any(len(g) < min_group for g in groups):
        return False
    if contiguous and any(list(g) != list(range(g[0], g[0] + len(g))) for g in groups):
        return False
    return True


def as_ranges(groups: Groups) -> list[list[int]]:
    """Inclusive ``[first, last]`` pairs for contiguous groups."""
    return [[g[0], g[-1]] for g in groups]
