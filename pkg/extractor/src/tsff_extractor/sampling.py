"""Evenly-spaced frame selection: stride trunc(N/T), 1-based indices
[t', 2t', ..., Tt']. Independent re-implementation of the engine's rule."""

import math


def select_frame_indices(N: int, T: int) -> list[int]:
    if T < 1:
        raise ValueError(f"target count must be >= 1, got {T}")
    if N < T:
        raise ValueError(f"video has {N} frames, need {T}")
    stride = math.trunc(N / T)
    return [k * stride for k in range(1, T + 1)]
