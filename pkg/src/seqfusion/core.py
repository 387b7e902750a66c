"""Dense float64 math primitives: affine maps, softmax, cross-entropy,
seeded deterministic initialization.

All tensors are plain numpy float64 arrays with explicit shapes. There is no
broadcasting in the public operations: every shape mismatch is a hard error so
the hand-written gradient code stays auditable.
"""

from __future__ import annotations

import numpy as np

# floor added inside the log so a zero probability never produces -inf
CROSS_ENTROPY_FLOOR = 1e-12

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


class DimensionError(ValueError):
    """Raised when tensor shapes do not conform."""


class Rng:
    """Deterministic random stream. Same seed -> same draws, any platform.

    Thin wrapper over PCG64 that also remembers its seed so disjoint child
    streams can be derived (one per sample, per epoch, ...). Never share one
    instance across concurrent consumers; spawn children instead.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def spawn(self, ordinal: int) -> "Rng":
        """Derive an independent child stream; deterministic in (seed, ordinal)."""
        mixed = (self.seed ^ ((int(ordinal) + 1) * _GOLDEN)) & _MASK64
        return Rng(mixed)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape).astype(np.float64)

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        return (self._gen.standard_normal(size=shape) * scale).astype(np.float64)

    def integers(self, low: int, high: int, shape=None):
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def check_finite(x: np.ndarray, what: str = "tensor") -> None:
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {what}")


def affine(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = W @ x + b with strict shape checking."""
    if W.ndim != 2 or x.ndim != 1 or b.ndim != 1:
        raise DimensionError(
            f"affine expects matrix/vector/vector, got {W.shape}, {x.shape}, {b.shape}"
        )
    if W.shape[1] != x.shape[0] or W.shape[0] != b.shape[0]:
        raise DimensionError(
            f"affine shape mismatch: W {W.shape} vs x {x.shape}, b {b.shape}"
        )
    return W @ x + b


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max subtraction)."""
    if z.ndim != 1 or z.shape[0] < 1:
        raise DimensionError(f"softmax expects a non-empty vector, got shape {z.shape}")
    shifted = z - np.max(z)
    e = np.exp(shifted)
    return e / np.sum(e)


def cross_entropy(p: np.ndarray, label: int) -> float:
    """-ln(p[label] + floor) for a probability vector p."""
    if p.ndim != 1:
        raise DimensionError(f"cross_entropy expects a vector, got shape {p.shape}")
    if not (0 <= label < p.shape[0]):
        raise IndexError(f"label {label} out of range for {p.shape[0]} classes")
    if abs(float(np.sum(p)) - 1.0) > 1e-9 or np.any(p < -1e-9):
        raise ValueError("input is not on the probability simplex")
    return float(-np.log(p[label] + CROSS_ENTROPY_FLOOR))


def cross_entropy_softmax_grad(probs: np.ndarray, label: int) -> np.ndarray:
    """Exact gradient of cross_entropy(softmax(z), label) w.r.t. the logits z,
    given probs = softmax(z). Accounts for the probability floor."""
    onehot = np.zeros_like(probs)
    onehot[label] = 1.0
    pl = probs[label]
    return (pl / (pl + CROSS_ENTROPY_FLOOR)) * (probs - onehot)


def seeded_init(shape, scheme: str, rng: Rng | None = None, value: float = 0.0) -> np.ndarray:
    """Deterministic initialization. Schemes: glorot_uniform | zeros | constant.

    glorot_uniform draws U(-L, L) with L = sqrt(6 / (fan_in + fan_out));
    fan_in/fan_out follow the (out, in) matrix convention, vectors use
    fan_in = fan_out = len.
    """
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise DimensionError(f"invalid shape {shape}")
    if scheme == "zeros":
        return np.zeros(shape, dtype=np.float64)
    if scheme == "constant":
        return np.full(shape, float(value), dtype=np.float64)
    if scheme == "glorot_uniform":
        if rng is None:
            raise ValueError("glorot_uniform requires an rng")
        if len(shape) == 2:
            fan_out, fan_in = shape
        else:
            fan_in = fan_out = shape[0]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, shape)
    raise ValueError(f"unknown init scheme {scheme!r}")


def sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def onehot(label: int, k: int) -> np.ndarray:
    v = np.zeros(k, dtype=np.float64)
    v[label] = 1.0
    return v
