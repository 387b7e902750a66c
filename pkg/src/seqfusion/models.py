"""The four fusion architectures:

conv_l / fc_l : single-stream seq-to-one LSTM over one feature stream,
                dropout, affine head, softmax.
fu_1          : both streams' final hidden states concatenated, dropout,
                a single (2H -> K) affine (which *is* the head), softmax.
fu_2          : both streams run sequence-to-sequence, per-timestep affine
                merge of the concatenated hidden states, dropout on each
                merged vector, a final seq-to-one LSTM, dropout, head,
                softmax. Gradients flow jointly into both stream LSTMs.
"""

from __future__ import annotations

import io
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import (DimensionError, Rng, affine, cross_entropy_softmax_grad,
                   seeded_init, softmax)
from .lstm import LstmCache, LstmParams, bptt, run_forward

VARIANTS = ("conv_l", "fc_l", "fu_1", "fu_2")

CHECKPOINT_MAGIC = b"FSM1"
CHECKPOINT_VERSION = 1


class ConfigError(ValueError):
    pass


class CacheError(RuntimeError):
    pass


@dataclass
class Sample:
    """One video: dual per-frame feature sequences plus its class label."""

    x_conv: list[np.ndarray]
    x_fc: list[np.ndarray]
    label: int
    video_id: str = ""

    def __post_init__(self):
        if len(self.x_conv) != len(self.x_fc) or len(self.x_conv) < 1:
            raise DimensionError(
                f"stream lengths differ or empty: conv={len(self.x_conv)} "
                f"fc={len(self.x_fc)} (video {self.video_id!r})"
            )

    @property
    def T(self) -> int:
        return len(self.x_conv)


@dataclass
class ModelConfig:
    variant: str
    D_conv: int
    D_fc: int
    K: int
    H: int = 100
    D_merge: int = 100
    dropout_rate: float = 0.25
    conv_pooling: str = "spatial_average"  # or "flatten"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.H < 1 or self.K < 2 or min(self.D_conv, self.D_fc, self.D_merge) < 1:
            raise ConfigError("dimensions must be positive and K >= 2")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ConfigError("dropout_rate must be in [0, 1)")
        if self.conv_pooling not in ("spatial_average", "flatten"):
            raise ConfigError(f"unknown conv_pooling {self.conv_pooling!r}")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant, "D_conv": self.D_conv, "D_fc": self.D_fc,
            "K": self.K, "H": self.H, "D_merge": self.D_merge,
            "dropout_rate": self.dropout_rate, "conv_pooling": self.conv_pooling,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class FusionModel:
    cfg: ModelConfig
    lstm_conv: LstmParams | None = None
    lstm_fc: LstmParams | None = None
    lstm_merge: LstmParams | None = None
    W_merge: np.ndarray | None = None
    b_merge: np.ndarray | None = None
    W_head: np.ndarray | None = None
    b_head: np.ndarray | None = None

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        """Canonical checkpoint order: conv LSTM, fc LSTM, merge affine,
        merge LSTM, head affine (present tensors only)."""
        out: list[tuple[str, np.ndarray]] = []
        if self.lstm_conv is not None:
            out += self.lstm_conv.tensors("conv.")
        if self.lstm_fc is not None:
            out += self.lstm_fc.tensors("fc.")
        if self.W_merge is not None:
            out += [("merge.W", self.W_merge), ("merge.b", self.b_merge)]
        if self.lstm_merge is not None:
            out += self.lstm_merge.tensors("mergelstm.")
        out += [("head.W", self.W_head), ("head.b", self.b_head)]
        return out

    def param_count(self) -> int:
        return sum(int(a.size) for _, a in self.tensors())

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(a) for name, a in self.tensors()}


def build_model(cfg: ModelConfig, rng: Rng) -> FusionModel:
    """Initialize all parameter tensors for the requested variant."""
    m = FusionModel(cfg=cfg)
    H, K = cfg.H, cfg.K
    if cfg.variant in ("conv_l", "fu_1", "fu_2"):
        m.lstm_conv = LstmParams.init(cfg.D_conv, H, rng)
    if cfg.variant in ("fc_l", "fu_1", "fu_2"):
        m.lstm_fc = LstmParams.init(cfg.D_fc, H, rng)
    if cfg.variant == "fu_2":
        m.W_merge = seeded_init((cfg.D_merge, 2 * H), "glorot_uniform", rng)
        m.b_merge = np.zeros(cfg.D_merge)
        m.lstm_merge = LstmParams.init(cfg.D_merge, H, rng)
    if cfg.variant == "fu_1":
        # the merge weight of the concatenated streams is itself the head
        m.W_head = seeded_init((K, 2 * H), "glorot_uniform", rng)
    else:
        m.W_head = seeded_init((K, H), "glorot_uniform", rng)
    m.b_head = np.zeros(K)
    return m


def _dropout_mask(shape, rate: float, rng: Rng | None) -> np.ndarray:
    """Inverted-dropout mask: zeros with prob `rate`, survivors scaled."""
    if rate == 0.0:
        return np.ones(shape)
    if rng is None:
        raise ValueError("train-mode dropout requires an rng")
    keep = (rng.uniform(0.0, 1.0, shape) >= rate).astype(np.float64)
    return keep / (1.0 - rate)


@dataclass
class ForwardCache:
    mode: str
    sample: Sample
    probs: np.ndarray | None = None
    # single-stream / fu_1
    cache_conv: LstmCache | None = None
    cache_fc: LstmCache | None = None
    h_final: np.ndarray | None = None       # input to head, pre-dropout
    head_mask: np.ndarray | None = None
    # fu_2
    merged: list[np.ndarray] = field(default_factory=list)        # m_t pre-dropout
    merged_dropped: list[np.ndarray] = field(default_factory=list)
    merge_masks: list[np.ndarray] = field(default_factory=list)
    cache_merge: LstmCache | None = None


def _check_sample_dims(cfg: ModelConfig, s: Sample) -> None:
    if cfg.variant != "fc_l" and s.x_conv[0].shape != (cfg.D_conv,):
        raise DimensionError(
            f"conv feature dim {s.x_conv[0].shape} vs config D_conv={cfg.D_conv} "
            f"(video {s.video_id!r})"
        )
    if cfg.variant != "conv_l" and s.x_fc[0].shape != (cfg.D_fc,):
        raise DimensionError(
            f"fc feature dim {s.x_fc[0].shape} vs config D_fc={cfg.D_fc} "
            f"(video {s.video_id!r})"
        )


def forward(m: FusionModel, s: Sample, mode: str = "eval",
            rng: Rng | None = None) -> tuple[np.ndarray, ForwardCache]:
    """Class probabilities for one sample. Train mode applies dropout."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode {mode!r}")
    cfg = m.cfg
    _check_sample_dims(cfg, s)
    rate = cfg.dropout_rate if mode == "train" else 0.0
    cache = ForwardCache(mode=mode, sample=s)

    if cfg.variant in ("conv_l", "fc_l"):
        if cfg.variant == "conv_l":
            cache.cache_conv = run_forward(s.x_conv, m.lstm_conv)
            h = cache.cache_conv.h[-1]
        else:
            cache.cache_fc = run_forward(s.x_fc, m.lstm_fc)
            h = cache.cache_fc.h[-1]
    elif cfg.variant == "fu_1":
        cache.cache_conv = run_forward(s.x_conv, m.lstm_conv)
        cache.cache_fc = run_forward(s.x_fc, m.lstm_fc)
        h = np.concatenate([cache.cache_conv.h[-1], cache.cache_fc.h[-1]])
    else:  # fu_2
        cache.cache_conv = run_forward(s.x_conv, m.lstm_conv)
        cache.cache_fc = run_forward(s.x_fc, m.lstm_fc)
        for hc, hf in zip(cache.cache_conv.h, cache.cache_fc.h):
            m_t = affine(np.concatenate([hc, hf]), m.W_merge, m.b_merge)
            mask = _dropout_mask(m_t.shape, rate, rng)
            cache.merged.append(m_t)
            cache.merge_masks.append(mask)
            cache.merged_dropped.append(m_t * mask)
        cache.cache_merge = run_forward(cache.merged_dropped, m.lstm_merge)
        h = cache.cache_merge.h[-1]

    cache.h_final = h
    cache.head_mask = _dropout_mask(h.shape, rate, rng)
    logits = affine(h * cache.head_mask, m.W_head, m.b_head)
    probs = softmax(logits)
    cache.probs = probs
    return probs, cache


def backward(m: FusionModel, cache: ForwardCache, label: int) -> dict[str, np.ndarray]:
    """Exact gradients of cross_entropy(forward_probs, label) w.r.t. every
    trainable tensor, reusing the forward pass's dropout masks."""
    if cache.probs is None or cache.h_final is None:
        raise CacheError("backward requires a cache from forward()")
    cfg = m.cfg
    grads = m.zero_grads()

    dlogits = cross_entropy_softmax_grad(cache.probs, label)
    h_dropped = cache.h_final * cache.head_mask
    grads["head.W"] += np.outer(dlogits, h_dropped)
    grads["head.b"] += dlogits
    dh = (m.W_head.T @ dlogits) * cache.head_mask

    def add_lstm(prefix: str, g: LstmParams) -> None:
        for name, a in g.tensors(prefix):
            grads[name] += a

    if cfg.variant == "conv_l":
        g, _ = bptt(m.lstm_conv, cache.cache_conv, [dh])
        add_lstm("conv.", g)
    elif cfg.variant == "fc_l":
        g, _ = bptt(m.lstm_fc, cache.cache_fc, [dh])
        add_lstm("fc.", g)
    elif cfg.variant == "fu_1":
        H = cfg.H
        gc, _ = bptt(m.lstm_conv, cache.cache_conv, [dh[:H]])
        gf, _ = bptt(m.lstm_fc, cache.cache_fc, [dh[H:]])
        add_lstm("conv.", gc)
        add_lstm("fc.", gf)
    else:  # fu_2
        H = cfg.H
        gm, dm_dropped = bptt(m.lstm_merge, cache.cache_merge, [dh])
        add_lstm("mergelstm.", gm)
        up_conv, up_fc = [], []
        for t, dmd in enumerate(dm_dropped):
            dm = dmd * cache.merge_masks[t]
            concat = np.concatenate([cache.cache_conv.h[t], cache.cache_fc.h[t]])
            grads["merge.W"] += np.outer(dm, concat)
            grads["merge.b"] += dm
            dconcat = m.W_merge.T @ dm
            up_conv.append(dconcat[:H])
            up_fc.append(dconcat[H:])
        gc, _ = bptt(m.lstm_conv, cache.cache_conv, up_conv)
        gf, _ = bptt(m.lstm_fc, cache.cache_fc, up_fc)
        add_lstm("conv.", gc)
        add_lstm("fc.", gf)
    return grads


def predict(m: FusionModel, s: Sample) -> int:
    """Eval-mode argmax class; ties break toward the lowest index."""
    probs, _ = forward(m, s, mode="eval")
    return int(np.argmax(probs))


# --- checkpoint I/O ---------------------------------------------------------

def save_model(path: str, m: FusionModel) -> None:
    """Versioned binary checkpoint; written atomically (temp + rename)."""
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    cfg_blob = json.dumps(m.cfg.to_dict(), sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(cfg_blob)))
    buf.write(cfg_blob)
    for _, a in m.tensors():
        buf.write(struct.pack("<B", a.ndim))
        for d in a.shape:
            buf.write(struct.pack("<I", d))
        buf.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(buf.getvalue())
    os.replace(tmp, path)


def load_model(path: str) -> FusionModel:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ConfigError(f"bad checkpoint magic {data[:4]!r}")
    off = 4
    (version,) = struct.unpack_from("<I", data, off)
    off += 4
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}")
    (n,) = struct.unpack_from("<I", data, off)
    off += 4
    cfg = ModelConfig.from_dict(json.loads(data[off:off + n].decode("utf-8")))
    off += n
    m = build_model(cfg, Rng(0))
    for name, a in m.tensors():
        (ndim,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        if tuple(shape) != a.shape:
            raise ConfigError(f"checkpoint tensor {name} shape {shape} vs {a.shape}")
        count = int(np.prod(shape))
        vals = np.frombuffer(data, dtype="<f8", count=count, offset=off)
        off += 8 * count
        a[...] = vals.reshape(a.shape)
    if off != len(data):
        raise ConfigError("trailing bytes in checkpoint")
    return m
