"""Frame access for video files (via OpenCV) and frame directories
(image files in sorted name order). Frames are returned as RGB uint8 arrays."""

from __future__ import annotations

import os

import cv2
import numpy as np

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp")


class DecodeError(ValueError):
    pass


def list_frame_files(directory: str) -> list[str]:
    names = sorted(n for n in os.listdir(directory)
                   if n.lower().endswith(IMAGE_EXTS))
    if not names:
        raise DecodeError(f"no image files in {directory}")
    return [os.path.join(directory, n) for n in names]


def count_frames(path: str) -> int:
    """Total frame count of a video file or frame directory."""
    if os.path.isdir(path):
        return len(list_frame_files(path))
    cap = cv2.VideoCapture(path)
    if not cap.isOpened():
        raise DecodeError(f"cannot decode {path}")
    n = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
    cap.release()
    if n < 1:
        raise DecodeError(f"no frames in {path}")
    return n


def read_frames(path: str, indices_1based: list[int]) -> list[np.ndarray]:
    """Read the selected frames (1-based indices) as RGB arrays."""
    if os.path.isdir(path):
        files = list_frame_files(path)
        out = []
        for idx in indices_1based:
            img = cv2.imread(files[idx - 1], cv2.IMREAD_COLOR)
            if img is None:
                raise DecodeError(f"cannot read {files[idx - 1]}")
            out.append(cv2.cvtColor(img, cv2.COLOR_BGR2RGB))
        return out

    cap = cv2.VideoCapture(path)
    if not cap.isOpened():
        raise DecodeError(f"cannot decode {path}")
    wanted = set(indices_1based)
    grabbed: dict[int, np.ndarray] = {}
    pos = 0
    while len(grabbed) < len(wanted):
        ok, frame = cap.read()
        if not ok:
            break
        pos += 1
        if pos in wanted:
            grabbed[pos] = cv2.cvtColor(frame, cv2.COLOR_BGR2RGB)
    cap.release()
    missing = [i for i in indices_1based if i not in grabbed]
    if missing:
        raise DecodeError(f"frames {missing} unreadable in {path}")
    return [grabbed[i] for i in indices_1based]
