"""Group-wise application of quality-enhancement operators.

An operator maps a stack of frames ``(g, H, W, C)`` to an array of the
same shape. It only ever sees the frames of one temporal group.
"""

from __future__ import annotations

from functools import partial
from typing import Callable

import numpy as np

from .grouping import Groups, distance_matrix, is_valid_partition
from .tensor_io import check_latents

GroupwiseOperator = Callable[[np.ndarray], np.ndarray]


def identity(group: np.ndarray) -> np.ndarray:
    return group.copy()


def group_mean(group: np.ndarray) -> np.ndarray:
    """Replace every frame with the mean frame of its group."""
    return np.broadcast_to(group.mean(axis=0), group.shape).copy()


def medoid_index(group: np.ndarray) -> int:
    """Frame with the smallest total pooled distance to the rest; lowest index on ties."""
    return int(np.argmin(distance_matrix(group).sum(axis=1)))


def pivot_propagate(group: np.ndarray, beta: float) -> np.ndarray:
    """Blend each frame towards the group's medoid: ``(1 - beta) * f + beta * pivot``."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    group = np.asarray(group, dtype=np.float64)
    if len(group) == 0:
        raise ValueError("empty group")
    pivot = group[medoid_index(group)]
    return (1.0 - beta) * group + beta * pivot


def make_operator(name: str, beta: float = 0.5) -> GroupwiseOperator:
    if name == "identity":
        return identity
    if name == "mean":
        return group_mean
    if name == "pivot":
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {beta}")
        return partial(pivot_propagate, beta=beta)
    raise ValueError(f"unknown operator {name!r}; choose identity, mean or pivot")


def apply_groupwise(op: GroupwiseOperator, groups: Groups, z) -> np.ndarray:
    """Run ``op`` independently on each group's frames and reassemble in frame order."""
    z = check_latents(z)
    if not is_valid_partition(groups, z.shape[0], contiguous=False):
        raise ValueError(f"groups do not partition {z.shape[0]} frames")
    out = np.empty(z.shape, dtype=np.float64)
    for group in groups:
        idx = list(group)
        stacked = np.array(z[idx], dtype=np.float64)
        result = np.asarray(op(stacked))
        if result.shape != stacked.shape:
            raise ValueError(f"operator changed shape {stacked.shape} -> {result.shape}")
        out[idx] = result
    return out


def sliding_window_groups(n_frames: int, window: int) -> Groups:
    """Fixed, non-overlapping windows of ``window`` frames; the last may be shorter."""
    if not 1 <= window <= n_frames:
        raise ValueError(f"window must be in [1, {n_frames}], got {window}")
    return tuple(tuple(range(s, min(s + window, n_frames)))
                 for s in range(0, n_frames, window))
