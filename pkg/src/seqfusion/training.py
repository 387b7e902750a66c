"""Deterministic mini-batch training: Adam/SGD, dropout orchestration,
per-epoch checkpoints, and the finite-difference gradient-check harness.

Reproducibility contract: (seed, data, hyperparams) fully determine every
parameter after every step. Shuffling is keyed by (seed, epoch); each
sample's dropout stream is derived from (seed, epoch, dataset ordinal);
batch gradients are averaged in batch order.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .core import Rng, cross_entropy
from .models import (FusionModel, ModelConfig, Sample, backward, build_model,
                     forward, predict, save_model)


@dataclass
class Hyperparams:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    epochs: int = 10
    optimizer: str = "adam"  # or "sgd"
    clip_norm: float | None = None
    seed: int = 0
    checkpoint_every: int = 0  # epochs; 0 disables

    def __post_init__(self):
        if self.lr < 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("invalid hyperparameters")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_model(cls, model: FusionModel) -> "AdamState":
        return cls(m={n: np.zeros_like(a) for n, a in model.tensors()},
                   v={n: np.zeros_like(a) for n, a in model.tensors()},
                   step=0)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)


def adam_step(model: FusionModel, grads: dict[str, np.ndarray],
              state: AdamState, hp: Hyperparams) -> None:
    """Standard bias-corrected Adam update, in place."""
    state.step += 1
    t = state.step
    for name, a in model.tensors():
        g = grads[name]
        if g.shape != a.shape:
            raise ValueError(f"gradient shape {g.shape} vs param {a.shape} ({name})")
        state.m[name] = hp.beta1 * state.m[name] + (1 - hp.beta1) * g
        state.v[name] = hp.beta2 * state.v[name] + (1 - hp.beta2) * g * g
        m_hat = state.m[name] / (1 - hp.beta1 ** t)
        v_hat = state.v[name] / (1 - hp.beta2 ** t)
        a -= hp.lr * m_hat / (np.sqrt(v_hat) + hp.eps)


def sgd_step(model: FusionModel, grads: dict[str, np.ndarray],
             hp: Hyperparams) -> None:
    for name, a in model.tensors():
        a -= hp.lr * grads[name]


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> None:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


def accuracy(model: FusionModel, samples: list[Sample]) -> float:
    correct = sum(1 for s in samples if predict(model, s) == s.label)
    return correct / len(samples)


def train(model: FusionModel, samples: list[Sample], hp: Hyperparams,
          val_samples: list[Sample] | None = None,
          freeze: set[str] | frozenset[str] = frozenset(),
          checkpoint_dir: str | None = None,
          log=None) -> TrainHistory:
    """Train in place; returns the per-epoch history.

    `freeze` names tensors whose gradients are zeroed before the optimizer
    step, pinning them at their current values.
    """
    if not samples:
        raise ValueError("empty training set")
    n = len(samples)
    state = AdamState.for_model(model)
    history = TrainHistory()
    base = Rng(hp.seed)
    for epoch in range(hp.epochs):
        t0 = time.monotonic()
        order = list(Rng(hp.seed).spawn(1_000_003 + epoch).permutation(n))
        epoch_loss = 0.0
        for batch in _chunks(order, hp.batch_size):
            grads = model.zero_grads()
            for idx in batch:
                s = samples[idx]
                rng_s = base.spawn(epoch * n + idx)
                probs, cache = forward(model, s, mode="train", rng=rng_s)
                epoch_loss += cross_entropy(probs, s.label)
                for name, g in backward(model, cache, s.label).items():
                    grads[name] += g
            for g in grads.values():
                g /= len(batch)
            for name in freeze:
                grads[name][...] = 0.0
            if hp.clip_norm is not None:
                clip_gradients(grads, hp.clip_norm)
            if hp.optimizer == "adam":
                adam_step(model, grads, state, hp)
            else:
                sgd_step(model, grads, hp)
        history.train_loss.append(epoch_loss / n)
        history.train_acc.append(accuracy(model, samples))
        if val_samples:
            history.val_acc.append(accuracy(model, val_samples))
        history.seconds.append(time.monotonic() - t0)
        if checkpoint_dir and hp.checkpoint_every and (epoch + 1) % hp.checkpoint_every == 0:
            save_model(os.path.join(checkpoint_dir, f"epoch{epoch + 1:04d}.fsm"), model)
        if log is not None:
            msg = (f"epoch {epoch + 1}/{hp.epochs} loss {history.train_loss[-1]:.4f} "
                   f"acc {history.train_acc[-1]:.3f}")
            if val_samples:
                msg += f" val {history.val_acc[-1]:.3f}"
            log(msg)
    return history


# --- gradient checking ------------------------------------------------------

@dataclass
class GradCheckReport:
    variant: str
    max_rel_error: float
    mean_rel_error: float
    worst_tensor: str
    worst_index: int


def relative_error(a: float, n: float, floor: float = 1e-8) -> float:
    return abs(a - n) / max(floor, abs(a) + abs(n))


def _loss_fn(model: FusionModel, s: Sample, dropout_seed: int | None):
    """Loss with dropout masks fixed by a per-call reseeded stream, so the
    same masks recur for every finite-difference evaluation."""
    if dropout_seed is None:
        probs, cache = forward(model, s, mode="eval")
    else:
        probs, cache = forward(model, s, mode="train", rng=Rng(dropout_seed))
    return cross_entropy(probs, s.label), cache


def grad_check_model(model: FusionModel, s: Sample, fd_step: float = 1e-5,
                     dropout_seed: int | None = None) -> GradCheckReport:
    """Central finite differences over every trainable coordinate vs. the
    analytic backward pass.

    The error denominator is floored at 1e-6: below that scale central
    differences carry ~1e-11 of round-off noise, so tiny coordinates are
    held to absolute rather than relative agreement.
    """
    _, cache = _loss_fn(model, s, dropout_seed)
    analytic = backward(model, cache, s.label)
    max_err, sum_err, count = 0.0, 0.0, 0
    worst = ("", 0)
    for name, a in model.tensors():
        flat = a.reshape(-1)
        ga = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + fd_step
            lp, _ = _loss_fn(model, s, dropout_seed)
            flat[i] = orig - fd_step
            lm, _ = _loss_fn(model, s, dropout_seed)
            flat[i] = orig
            numeric = (lp - lm) / (2 * fd_step)
            err = relative_error(float(ga[i]), numeric, floor=1e-6)
            sum_err += err
            count += 1
            if err > max_err:
                max_err = err
                worst = (name, i)
    return GradCheckReport(model.cfg.variant, max_err, sum_err / count, *worst)


def grad_check_variant(variant: str, seed: int = 1, fd_step: float = 1e-5,
                       D_conv: int = 6, D_fc: int = 8, H: int = 4,
                       D_merge: int = 4, T: int = 4, K: int = 3,
                       dropout_rate: float = 0.0) -> GradCheckReport:
    """Build a desk-scale model of the given variant plus one random sample
    and run the finite-difference check."""
    cfg = ModelConfig(variant=variant, D_conv=D_conv, D_fc=D_fc, K=K, H=H,
                      D_merge=D_merge, dropout_rate=dropout_rate)
    rng = Rng(seed)
    model = build_model(cfg, rng)
    s = Sample(x_conv=[rng.normal((D_conv,)) for _ in range(T)],
               x_fc=[rng.normal((D_fc,)) for _ in range(T)],
               label=int(rng.integers(0, K)), video_id="gradcheck")
    dropout_seed = seed + 7919 if dropout_rate > 0 else None
    return grad_check_model(model, s, fd_step, dropout_seed)
