"""Feature-file container, dataset manifests, split planning, and the
synthetic two-stream dataset generator used for self-contained testing.

Feature file (.tsff) byte layout, little-endian throughout:

    magic        4 bytes  b"TSFF"
    version      u32      1
    id_len       u16      length of video_id in bytes
    video_id     utf-8
    label        u32      class index
    T            u32      frame count
    conv_kind    u8       0 = raw (C, Hs, Ws), 1 = pooled (D)
    conv dims    3 x u32 (raw) or 1 x u32 (pooled)
    fc_dim       u32
    payload      T frames, each: conv values then fc values, f32, row-major
    crc          u32      CRC32 of the payload bytes

Manifest: one record per line,
`video_id<TAB>class_name<TAB>group<TAB>split_tag<TAB>relative_path`;
`-` marks an absent group/split tag, `#` starts a comment, UTF-8.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .core import Rng
from .models import Sample

MAGIC = b"TSFF"
FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


class CorruptionError(ValueError):
    pass


class ManifestError(ValueError):
    pass


@dataclass
class FeatureMeta:
    video_id: str
    label: int
    T: int
    conv_shape: tuple[int, ...]  # (C, Hs, Ws) raw or (D,) pooled
    fc_dim: int

    @property
    def conv_is_raw(self) -> bool:
        return len(self.conv_shape) == 3


def write_feature_file(path: str, meta: FeatureMeta,
                       conv_frames: list[np.ndarray],
                       fc_frames: list[np.ndarray]) -> None:
    """Write one video's dual feature sequences; payload stored as f32."""
    if meta.T < 1:
        raise FormatError("T must be >= 1")
    if len(conv_frames) != meta.T or len(fc_frames) != meta.T:
        raise FormatError(
            f"frame counts {len(conv_frames)}/{len(fc_frames)} vs declared T={meta.T}"
        )
    conv_count = int(np.prod(meta.conv_shape))
    payload = bytearray()
    for cf, ff in zip(conv_frames, fc_frames):
        if cf.size != conv_count or ff.size != meta.fc_dim:
            raise FormatError(
                f"frame sizes {cf.size}/{ff.size} vs declared "
                f"{conv_count}/{meta.fc_dim}"
            )
        payload += np.ascontiguousarray(cf, dtype="<f4").tobytes()
        payload += np.ascontiguousarray(ff, dtype="<f4").tobytes()

    vid = meta.video_id.encode("utf-8")
    head = bytearray()
    head += MAGIC
    head += struct.pack("<I", FORMAT_VERSION)
    head += struct.pack("<H", len(vid)) + vid
    head += struct.pack("<II", meta.label, meta.T)
    if meta.conv_is_raw:
        head += struct.pack("<B3I", 0, *meta.conv_shape)
    else:
        head += struct.pack("<BI", 1, meta.conv_shape[0])
    head += struct.pack("<I", meta.fc_dim)

    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(bytes(head))
        f.write(bytes(payload))
        f.write(struct.pack("<I", zlib.crc32(bytes(payload)) & 0xFFFFFFFF))
    os.replace(tmp, path)


def _pool_conv(frame: np.ndarray, shape: tuple[int, ...], mode: str) -> np.ndarray:
    if len(shape) == 1:
        return frame
    if mode == "spatial_average":
        return frame.reshape(shape).mean(axis=(1, 2))
    if mode == "flatten":
        return frame
    raise ValueError(f"unknown conv pooling {mode!r}")


def read_feature_file(path: str, conv_pooling: str = "spatial_average"
                      ) -> tuple[Sample, FeatureMeta]:
    """Read and validate one feature file; raw conv frames are reduced per
    `conv_pooling` ("spatial_average" or "flatten") as they are loaded."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 8 or data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r} in {path}")
    off = 4
    try:
        (version,) = struct.unpack_from("<I", data, off)
        off += 4
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported format version {version}")
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
            raise FormatError(f"unknown conv layout kind {kind}")
        (fc_dim,) = struct.unpack_from("<I", data, off)
        off += 4
    except struct.error as e:
        raise CorruptionError(f"truncated header in {path}: {e}") from None

    meta = FeatureMeta(video_id, label, T, tuple(conv_shape), fc_dim)
    if T < 1:
        raise FormatError(f"declared T={T} in {path}")
    conv_count = int(np.prod(meta.conv_shape))
    payload_len = 4 * T * (conv_count + fc_dim)
    if len(data) != off + payload_len + 4:
        raise CorruptionError(
            f"size mismatch in {path}: have {len(data)} bytes, "
            f"expected {off + payload_len + 4}"
        )
    payload = data[off:off + payload_len]
    (crc_stored,) = struct.unpack_from("<I", data, off + payload_len)
    if zlib.crc32(payload) & 0xFFFFFFFF != crc_stored:
        raise CorruptionError(f"CRC mismatch in {path}")

    vals = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    per_frame = conv_count + fc_dim
    x_conv, x_fc = [], []
    for t in range(T):
        frame = vals[t * per_frame:(t + 1) * per_frame]
        x_conv.append(_pool_conv(frame[:conv_count], meta.conv_shape, conv_pooling))
        x_fc.append(frame[conv_count:])
    return Sample(x_conv, x_fc, label, video_id), meta


# --- manifests --------------------------------------------------------------

@dataclass
class ManifestEntry:
    video_id: str
    class_name: str
    class_index: int
    group: str | None
    split_tag: str | None
    path: str  # absolute path to the feature file


@dataclass
class Dataset:
    entries: list[ManifestEntry]
    class_names: list[str]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def K(self) -> int:
        return len(self.class_names)

    def entry(self, video_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.video_id == video_id:
                return e
        raise KeyError(video_id)

    def load_sample(self, e: ManifestEntry,
                    conv_pooling: str = "spatial_average") -> Sample:
        sample, meta = read_feature_file(e.path, conv_pooling)
        if meta.label != e.class_index:
            raise ManifestError(
                f"label mismatch for {e.video_id!r}: file says {meta.label}, "
                f"manifest says {e.class_index} ({e.class_name})"
            )
        return sample


def load_manifest(path: str, check_files: bool = True) -> Dataset:
    """Parse a manifest; class indices follow sorted class-name order."""
    records = []
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ManifestError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
            records.append(fields)

    class_names = sorted({r[1] for r in records})
    index = {name: i for i, name in enumerate(class_names)}
    entries, seen, missing = [], set(), []
    for vid, cname, group, tag, rel in records:
        if vid in seen:
            raise ManifestError(f"duplicate video_id {vid!r}")
        seen.add(vid)
        fpath = os.path.join(base, rel)
        if check_files and not os.path.isfile(fpath):
            missing.append(f"{vid!r} -> {rel}")
        entries.append(ManifestEntry(
            vid, cname, index[cname],
            None if group == "-" else group,
            None if tag == "-" else tag,
            fpath,
        ))
    if missing:
        raise ManifestError("missing feature files: " + "; ".join(missing))
    return Dataset(entries, class_names)


# --- split planning ---------------------------------------------------------

@dataclass
class Fold:
    name: str
    train_ids: list[str]
    test_ids: list[str]


@dataclass
class SplitPlan:
    scheme: str
    folds: list[Fold]


def make_splits(dataset: Dataset, scheme: str) -> SplitPlan:
    """LOOCV (per video or per group) or predefined split plans.

    Fold order is deterministic: sorted by held-out id / group / tag.
    """
    ids = [e.video_id for e in dataset.entries]
    if scheme == "loocv_video":
        folds = [Fold(vid, [i for i in ids if i != vid], [vid])
                 for vid in sorted(ids)]
    elif scheme == "loocv_group":
        groups: dict[str, list[str]] = {}
        for e in dataset.entries:
            if e.group is None:
                raise ManifestError(f"entry {e.video_id!r} has no group id")
            groups.setdefault(e.group, []).append(e.video_id)
        folds = []
        for g in sorted(groups):
            test = groups[g]
            folds.append(Fold(g, [i for i in ids if i not in set(test)], list(test)))
    elif scheme == "predefined":
        tags: dict[str, list[str]] = {}
        for e in dataset.entries:
            if e.split_tag is None:
                raise ManifestError(f"entry {e.video_id!r} has no split tag")
            tags.setdefault(e.split_tag, []).append(e.video_id)
        folds = []
        for tag in sorted(tags):
            test = set(tags[tag])
            folds.append(Fold(tag, [i for i in ids if i not in test],
                              [i for i in ids if i in test]))
    else:
        raise ValueError(f"unknown split scheme {scheme!r}")
    return SplitPlan(scheme, folds)


# --- synthetic dataset ------------------------------------------------------

@dataclass
class SynthSpec:
    K: int
    n_per_class: int
    T: int
    D_conv: int
    D_fc: int
    coupling: str  # conv_only | fc_only | xor
    noise: float = 0.1
    amplitude: float = 3.0

    def __post_init__(self):
        if self.coupling not in ("conv_only", "fc_only", "xor"):
            raise ValueError(f"unknown coupling {self.coupling!r}")
        if self.K < 2 or self.n_per_class < 1 or self.T < self.K:
            raise ValueError("need K >= 2, n_per_class >= 1, T >= K")


def motif_timestep(spec_or_T, K: int | None = None, motif: int = 0) -> int:
    """Designated bump timestep for motif index m: evenly spaced over [0, T)."""
    T = spec_or_T.T if isinstance(spec_or_T, SynthSpec) else spec_or_T
    K = spec_or_T.K if isinstance(spec_or_T, SynthSpec) else K
    return (motif * T) // K


def fc_block(spec: SynthSpec, cue: int) -> slice:
    """Coordinate block of the fc feature carrying static cue index `cue`."""
    width = spec.D_fc // spec.K
    return slice(cue * width, (cue + 1) * width)


def synth_dataset(spec: SynthSpec, rng: Rng) -> list[Sample]:
    """Deterministic synthetic two-stream dataset.

    conv_only: the class is the timestep position of an amplitude bump in the
    conv stream; fc is noise. fc_only is symmetric with a static coordinate
    block cue. xor: class = (conv motif + fc cue) mod K, so neither stream
    alone carries any label information.
    """
    if spec.coupling == "fc_only" and spec.D_fc < spec.K:
        raise ValueError("fc_only needs D_fc >= K")
    samples = []
    for c in range(spec.K):
        for j in range(spec.n_per_class):
            conv = rng.normal((spec.T, spec.D_conv), spec.noise)
            fc = rng.normal((spec.T, spec.D_fc), spec.noise)
            if spec.coupling == "conv_only":
                conv[motif_timestep(spec, motif=c)] += spec.amplitude
            elif spec.coupling == "fc_only":
                fc[:, fc_block(spec, c)] += spec.amplitude
            else:  # xor
                a = int(rng.integers(0, spec.K))
                b = (c - a) % spec.K
                conv[motif_timestep(spec, motif=a)] += spec.amplitude
                fc[:, fc_block(spec, b)] += spec.amplitude
            samples.append(Sample(
                x_conv=[conv[t] for t in range(spec.T)],
                x_fc=[fc[t] for t in range(spec.T)],
                label=c,
                video_id=f"{spec.coupling}_{c:02d}_{j:04d}",
            ))
    return samples


def conv_stump(spec: SynthSpec, s: Sample) -> int:
    """Oracle decision stump on the conv stream: which designated timestep
    carries the most energy."""
    scores = [float(np.mean(s.x_conv[motif_timestep(spec, motif=m)]))
              for m in range(spec.K)]
    return int(np.argmax(scores))


def fc_stump(spec: SynthSpec, s: Sample) -> int:
    """Oracle stump on the fc stream: which block has the highest mean."""
    mat = np.stack(s.x_fc)
    scores = [float(mat[:, fc_block(spec, b)].mean()) for b in range(spec.K)]
    return int(np.argmax(scores))


def write_synth_dataset(samples: list[Sample], spec: SynthSpec, outdir: str,
                        split_fractions: dict[str, float] | None = None) -> str:
    """Write samples as .tsff files plus a manifest; returns the manifest path.

    With split_fractions (tag -> fraction, summing to 1) each class's samples
    are assigned contiguous per-class slices in the given tag order.
    """
    os.makedirs(outdir, exist_ok=True)
    lines = []
    by_class: dict[int, list[Sample]] = {}
    for s in samples:
        by_class.setdefault(s.label, []).append(s)
    for c in sorted(by_class):
        group = by_class[c]
        tags = ["-"] * len(group)
        if split_fractions:
            pos = 0
            items = list(split_fractions.items())
            for k, (tag, frac) in enumerate(items):
                n = len(group) - pos if k == len(items) - 1 else int(round(frac * len(group)))
                tags[pos:pos + n] = [tag] * n
                pos += n
        for s, tag in zip(group, tags):
            fname = s.video_id + ".tsff"
            meta = FeatureMeta(s.video_id, s.label, s.T,
                               (s.x_conv[0].shape[0],), s.x_fc[0].shape[0])
            write_feature_file(os.path.join(outdir, fname), meta, s.x_conv, s.x_fc)
            lines.append(f"{s.video_id}\tclass{s.label:02d}\t-\t{tag}\t{fname}")
    manifest = os.path.join(outdir, "manifest.tsv")
    tmp = manifest + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write("# synthetic two-stream dataset\n")
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, manifest)
    return manifest
