"""Tensor math with reverse-mode autodiff plus the optimizer toolkit."""

from ecgssl.numcore.optim import (
    CONTINUE,
    STOP,
    AdamState,
    CosineSchedule,
    EarlyStopper,
    adam_step,
    clip_grad_norm,
    cosine_lr,
    early_stop_update,
)
from ecgssl.numcore.tensor import (
    Tape,
    Tensor,
    add,
    as_tensor,
    clip,
    concat,
    conv1d,
    div,
    exp,
    l2_normalize,
    log,
    logsumexp,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    relu,
    reshape,
    sigmoid,
    slice_,
    softmax,
    sqrt,
    square,
    stop_gradient,
    sub,
    sum_,
    transpose,
)

__all__ = [name for name in dir() if not name.startswith("_")]
