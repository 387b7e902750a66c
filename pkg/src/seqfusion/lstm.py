"""Standard forget-gate LSTM cell, sequence-to-one / sequence-to-sequence
runners, and exact backpropagation through time.

No peepholes, zero initial state. The cell:
    i = sigma(W_i x + U_i h + b_i)      f = sigma(W_f x + U_f h + b_f)
    o = sigma(W_o x + U_o h + b_o)      g = tanh (W_g x + U_g h + b_g)
    c_t = f * c_prev + i * g            h_t = o * tanh(c_t)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DimensionError, Rng, seeded_init, sigmoid

GATES = ("i", "f", "o", "g")


@dataclass
class LstmParams:
    """All trainable tensors of one LSTM layer (input dim D, hidden dim H)."""

    D: int
    H: int
    W: dict[str, np.ndarray]  # gate -> H x D
    U: dict[str, np.ndarray]  # gate -> H x H
    b: dict[str, np.ndarray]  # gate -> H

    @classmethod
    def init(cls, D: int, H: int, rng: Rng) -> "LstmParams":
        # forget-gate bias starts at 1.0 (training aid), other biases at 0
        W = {g: seeded_init((H, D), "glorot_uniform", rng) for g in GATES}
        U = {g: seeded_init((H, H), "glorot_uniform", rng) for g in GATES}
        b = {g: seeded_init((H,), "constant", value=1.0 if g == "f" else 0.0)
             for g in GATES}
        return cls(D, H, W, U, b)

    @classmethod
    def zeros(cls, D: int, H: int) -> "LstmParams":
        W = {g: np.zeros((H, D)) for g in GATES}
        U = {g: np.zeros((H, H)) for g in GATES}
        b = {g: np.zeros(H) for g in GATES}
        return cls(D, H, W, U, b)

    def tensors(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        """Canonical (name, array) order: W_i..W_g, U_i..U_g, b_i..b_g."""
        out = []
        for kind, table in (("W", self.W), ("U", self.U), ("b", self.b)):
            for g in GATES:
                out.append((f"{prefix}{kind}_{g}", table[g]))
        return out

    def param_count(self) -> int:
        return 4 * (self.H * self.D + self.H * self.H + self.H)


@dataclass
class LstmCache:
    """Per-timestep activations stored by the forward pass, for BPTT."""

    xs: list[np.ndarray]
    i: list[np.ndarray] = field(default_factory=list)
    f: list[np.ndarray] = field(default_factory=list)
    o: list[np.ndarray] = field(default_factory=list)
    g: list[np.ndarray] = field(default_factory=list)
    c: list[np.ndarray] = field(default_factory=list)
    h: list[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.h)


def _gate_pre(p: LstmParams, gate: str, x: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    return p.W[gate] @ x + p.U[gate] @ h_prev + p.b[gate]


def lstm_cell(x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray,
              p: LstmParams) -> tuple[np.ndarray, np.ndarray]:
    """One cell step; returns (h_t, c_t)."""
    if x.shape != (p.D,) or h_prev.shape != (p.H,) or c_prev.shape != (p.H,):
        raise DimensionError(
            f"lstm_cell shapes x{x.shape} h{h_prev.shape} c{c_prev.shape} "
            f"vs D={p.D} H={p.H}"
        )
    i = sigmoid(_gate_pre(p, "i", x, h_prev))
    f = sigmoid(_gate_pre(p, "f", x, h_prev))
    o = sigmoid(_gate_pre(p, "o", x, h_prev))
    g = np.tanh(_gate_pre(p, "g", x, h_prev))
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def run_forward(xs: list[np.ndarray], p: LstmParams) -> LstmCache:
    """Run the recurrence from zero state, caching every activation."""
    if len(xs) < 1:
        raise DimensionError("empty input sequence")
    cache = LstmCache(xs=list(xs))
    h = np.zeros(p.H)
    c_prev = np.zeros(p.H)
    for x in xs:
        if x.shape != (p.D,):
            raise DimensionError(f"input shape {x.shape} vs D={p.D}")
        i = sigmoid(_gate_pre(p, "i", x, h))
        f = sigmoid(_gate_pre(p, "f", x, h))
        o = sigmoid(_gate_pre(p, "o", x, h))
        g = np.tanh(_gate_pre(p, "g", x, h))
        c = f * c_prev + i * g
        h = o * np.tanh(c)
        cache.i.append(i)
        cache.f.append(f)
        cache.o.append(o)
        cache.g.append(g)
        cache.c.append(c)
        cache.h.append(h)
        c_prev = c
    return cache


def run_seq_to_one(xs: list[np.ndarray], p: LstmParams) -> np.ndarray:
    """Final hidden state h_T after running the whole sequence."""
    return run_forward(xs, p).h[-1]


def run_seq_to_seq(xs: list[np.ndarray], p: LstmParams) -> list[np.ndarray]:
    """Full hidden-state sequence [h_1 .. h_T]."""
    return list(run_forward(xs, p).h)


def bptt(p: LstmParams, cache: LstmCache,
         upstream: list[np.ndarray]) -> tuple[LstmParams, list[np.ndarray]]:
    """Exact gradients of sum_t <upstream_t, h_t> w.r.t. params and inputs.

    `upstream` has length T (one gradient per emitted hidden state) or
    length 1, which is taken as a gradient on the final state only.
    """
    T = len(cache)
    if T == 0 or len(cache.xs) != T:
        raise ValueError("cache inconsistent with forward sequence")
    if len(upstream) == 1 and T > 1:
        up = [np.zeros(p.H) for _ in range(T - 1)] + [upstream[0]]
    elif len(upstream) == T:
        up = upstream
    else:
        raise ValueError(f"upstream length {len(upstream)} vs sequence length {T}")

    grads = LstmParams.zeros(p.D, p.H)
    input_grads = [np.zeros(p.D) for _ in range(T)]
    dh_next = np.zeros(p.H)
    dc_next = np.zeros(p.H)
    for t in range(T - 1, -1, -1):
        x = cache.xs[t]
        h_prev = cache.h[t - 1] if t > 0 else np.zeros(p.H)
        c_prev = cache.c[t - 1] if t > 0 else np.zeros(p.H)
        i, f, o, g, c = cache.i[t], cache.f[t], cache.o[t], cache.g[t], cache.c[t]
        tc = np.tanh(c)

        dh = up[t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * c_prev

        dpre = {
            "i": di * i * (1.0 - i),
            "f": df * f * (1.0 - f),
            "o": do * o * (1.0 - o),
            "g": dg * (1.0 - g * g),
        }
        dx = np.zeros(p.D)
        dh_next = np.zeros(p.H)
        for gate in GATES:
            d = dpre[gate]
            grads.W[gate] += np.outer(d, x)
            grads.U[gate] += np.outer(d, h_prev)
            grads.b[gate] += d
            dx += p.W[gate].T @ d
            dh_next += p.U[gate].T @ d
        input_grads[t] = dx
        dc_next = dc * f
    return grads, input_grads
