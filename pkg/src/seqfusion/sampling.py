"""Evenly-spaced frame subsampling.

With N total frames and T targets: stride t' = trunc(N / T) and the selected
1-based frame indices are [1*t', 2*t', ..., T*t']. Internal storage is
0-based, so index k maps to frames[k - 1].
"""

from __future__ import annotations

import math


class InsufficientFramesError(ValueError):
    pass


def select_frame_indices(N: int, T: int, pad_repeat: bool = False) -> list[int]:
    """1-based evenly spaced frame indices; strictly increasing, all <= N.

    N < T raises unless pad_repeat is set, in which case [1..N] is returned
    followed by N repeated (T - N) times.
    """
    if T < 1:
        raise ValueError(f"target count must be >= 1, got {T}")
    if N < T:
        if pad_repeat:
            return list(range(1, N + 1)) + [N] * (T - N)
        raise InsufficientFramesError(f"video has {N} frames, need {T}")
    stride = math.trunc(N / T)
    return [k * stride for k in range(1, T + 1)]


def subsample_sequence(frames, T: int, pad_repeat: bool = False) -> list:
    """Pick T evenly spaced elements out of `frames`."""
    idx = select_frame_indices(len(frames), T, pad_repeat=pad_repeat)
    return [frames[k - 1] for k in idx]
