"""Adam, cosine annealing, early stopping and gradient clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ecgssl.errors import ConfigurationError, TrainingError


@dataclass
class AdamState:
    lr0: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **kwargs):
        state = cls(**kwargs)
        state.m = [np.zeros_like(_array(p)) for p in params]
        state.v = [np.zeros_like(_array(p)) for p in params]
        return state


def _array(p):
    return p.data if hasattr(p, "data") and not isinstance(p, np.ndarray) else p


def adam_step(params, grads, state, lr=None):
    """One bias-corrected Adam update, applied to ``params`` in place.

    ``params`` may be tensors or arrays; ``grads`` are arrays (``None`` is
    treated as zero).  Returns the updated state.
    """
    lr = state.lr0 if lr is None else lr
    if not state.m:
        state.m = [np.zeros_like(_array(p)) for p in params]
        state.v = [np.zeros_like(_array(p)) for p in params]
    if len(state.m) != len(params) or len(grads) != len(params):
        raise ConfigurationError("adam_step: params, grads and state lengths differ")
    step = state.step + 1
    for g in grads:
        if g is not None and not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient", step=step)
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        arr = _array(p)
        if g is None:
            g = np.zeros_like(arr)
        if g.shape != arr.shape:
            raise ConfigurationError(f"adam_step: gradient {g.shape} vs parameter {arr.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        arr -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    state.step = step
    return state


def clip_grad_norm(grads, max_norm=5.0):
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``."""
    total = math.sqrt(sum(float((g * g).sum()) for g in grads if g is not None))
    if total > max_norm:
        scale = max_norm / total
        for g in grads:
            if g is not None:
                g *= scale
    return total


@dataclass(frozen=True)
class CosineSchedule:
    lr0: float = 1e-3
    total_steps: int = 1
    eta_min: float = 0.0

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigurationError("cosine schedule needs total_steps >= 1")
        if self.eta_min > self.lr0:
            raise ConfigurationError("cosine schedule needs eta_min <= lr0")


def cosine_lr(t, schedule):
    if t >= schedule.total_steps:
        return schedule.eta_min
    t = max(t, 0)
    span = schedule.lr0 - schedule.eta_min
    return schedule.eta_min + 0.5 * span * (1.0 + math.cos(math.pi * t / schedule.total_steps))


@dataclass
class EarlyStopper:
    patience: int = 5
    min_delta: float = 0.0
    best_loss: float = math.inf
    best_index: int = -1
    epochs: int = 0
    since_improvement: int = 0

    @property
    def best_epoch(self):
        """1-based position of the best loss seen so far."""
        return self.best_index + 1


CONTINUE = "continue"
STOP = "stop"


def early_stop_update(stopper, val_loss):
    """Record one validation loss; return ``"stop"`` after ``patience``
    consecutive epochs without strict improvement, else ``"continue"``."""
    if not math.isfinite(val_loss):
        raise TrainingError("non-finite validation loss", step=stopper.epochs + 1)
    if val_loss < stopper.best_loss - stopper.min_delta:
        stopper.best_loss = float(val_loss)
        stopper.best_index = stopper.epochs
        stopper.since_improvement = 0
    else:
        stopper.since_improvement += 1
    stopper.epochs += 1
    return STOP if stopper.since_improvement >= stopper.patience else CONTINUE
