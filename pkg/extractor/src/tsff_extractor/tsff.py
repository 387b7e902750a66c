"""Independent writer and validator for the .tsff feature-file format.

Layout (all integers little-endian):

    offset  size  field
    0       4     magic "TSFF"
    4       4     u32 format version (1)
    8       2     u16 video-id byte length L
    10      L     utf-8 video id
    ..      4     u32 class label
    ..      4     u32 frame count T
    ..      1     u8 conv layout kind: 0 = raw (C, H, W), 1 = pooled (D,)
    ..      12|4  conv dims as u32s (three for raw, one for pooled)
    ..      4     u32 fc dimension
    ..      var   payload: T frames of f32, each frame conv values then fc
    end-4   4     u32 CRC-32 of the payload bytes

This module is deliberately written from the layout above rather than
importing the engine's implementation; the test suite cross-checks the two.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass

import numpy as np

MAGIC = b"TSFF"
VERSION = 1


class ValidationError(ValueError):
    """Raised with the byte offset at which the file stops making sense."""


def write(path: str, video_id: str, label: int,
          conv_frames: list[np.ndarray], fc_frames: list[np.ndarray],
          conv_shape: tuple[int, ...]) -> None:
    """Write one video's feature sequences. conv_shape is (C, H, W) for raw
    spatial maps or (D,) for pre-pooled vectors."""
    T = len(conv_frames)
    if T < 1 or len(fc_frames) != T:
        raise ValueError(f"frame counts {T}/{len(fc_frames)} invalid")
    fc_dim = int(fc_frames[0].size)
    conv_count = int(np.prod(conv_shape))

    vid = video_id.encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<H", len(vid)) + vid
    out += struct.pack("<II", int(label), T)
    if len(conv_shape) == 3:
        out += struct.pack("<B3I", 0, *conv_shape)
    elif len(conv_shape) == 1:
        out += struct.pack("<BI", 1, conv_shape[0])
    else:
        raise ValueError(f"conv shape must be (C,H,W) or (D,): {conv_shape}")
    out += struct.pack("<I", fc_dim)

    payload = bytearray()
    for cf, ff in zip(conv_frames, fc_frames):
        if cf.size != conv_count or ff.size != fc_dim:
            raise ValueError(f"frame sizes {cf.size}/{ff.size} vs declared "
                             f"{conv_count}/{fc_dim}")
        payload += np.ascontiguousarray(cf, dtype="<f4").tobytes()
        payload += np.ascontiguousarray(ff, dtype="<f4").tobytes()
    out += payload
    out += struct.pack("<I", zlib.crc32(bytes(payload)) & 0xFFFFFFFF)

    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(bytes(out))
    os.replace(tmp, path)


@dataclass(frozen=True)
class FileReport:
    video_id: str
    label: int
    T: int
    conv_shape: tuple[int, ...]
    fc_dim: int
    payload_bytes: int


def validate(path: str) -> FileReport:
    """Full structural check of a .tsff file: header fields, declared vs
    actual size, and payload CRC. Errors name the failing byte offset."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValidationError(f"offset 0: magic is {data[:4]!r}, want {MAGIC!r}")
    off = 4
    try:
        (version,) = struct.unpack_from("<I", data, off)
        if version != VERSION:
            raise ValidationError(f"offset {off}: version {version}, want {VERSION}")
        off += 4
        (id_len,) = struct.unpack_from("<H", data, off)
        off += 2
        video_id = data[off:off + id_len].decode("utf-8")
        off += id_len
        label, T = struct.unpack_from("<II", data, off)
        off += 8
        (kind,) = struct.unpack_from("<B", data, off)
        off += 1
        if kind == 0:
            conv_shape = struct.unpack_from("<3I", data, off)
            off += 12
        elif kind == 1:
            conv_shape = struct.unpack_from("<I", data, off)
            off += 4
        else:
            raise ValidationError(f"offset {off - 1}: conv layout kind {kind}")
        (fc_dim,) = struct.unpack_from("<I", data, off)
        off += 4
    except struct.error:
        raise ValidationError(f"offset {off}: truncated header") from None

    if T < 1:
        raise ValidationError(f"frame count {T} declared in header")
    conv_count = int(np.prod(conv_shape))
    payload_len = 4 * T * (conv_count + fc_dim)
    if len(data) != off + payload_len + 4:
        raise ValidationError(
            f"offset {off}: payload should run {payload_len} bytes plus a "
            f"4-byte checksum, file holds {len(data) - off}")
    payload = data[off:off + payload_len]
    (crc_stored,) = struct.unpack_from("<I", data, off + payload_len)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    if crc != crc_stored:
        raise ValidationError(
            f"offset {off + payload_len}: checksum {crc_stored:#010x} "
            f"does not match payload ({crc:#010x})")
    return FileReport(video_id=video_id, label=int(label), T=int(T),
                      conv_shape=tuple(int(d) for d in conv_shape),
                      fc_dim=int(fc_dim), payload_bytes=payload_len)
