"""Shared 1D CNN encoder, projection head, masked-signal decoder and the
supervised baseline (encoder + sigmoid head trained with BCE)."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ecgssl.errors import ConfigurationError, ShapeError
from ecgssl.numcore import checkpoint
from ecgssl.numcore import tensor as T
from ecgssl.numcore.optim import (
    STOP,
    AdamState,
    CosineSchedule,
    EarlyStopper,
    adam_step,
    clip_grad_norm,
    cosine_lr,
    early_stop_update,
)
from ecgssl.numcore.tensor import Tensor

log = logging.getLogger(__name__)

SEGMENT_LENGTH = 1000


@dataclass(frozen=True)
class EncoderConfig:
    channels: tuple = (16, 32, 64)
    kernel_size: int = 7
    stride: int = 2
    embedding_dim: int = 64
    input_length: int = SEGMENT_LENGTH

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if not self.channels:
            raise ConfigurationError("encoder needs at least one conv block")
        if self.embedding_dim < 2:
            raise ConfigurationError("embedding_dim must be >= 2")
        if self.kernel_size < 1 or self.stride < 1:
            raise ConfigurationError("kernel_size and stride must be positive")

    @property
    def downsample(self):
        return self.stride ** len(self.channels)

    def feature_length(self):
        n, pad = self.input_length, self.kernel_size // 2
        for _ in self.channels:
            n = (n + 2 * pad - self.kernel_size) // self.stride + 1
        return n


class Module:
    """Named-parameter container; parameters are leaf tensors."""

    def __init__(self):
        self.params = {}

    def parameters(self):
        return list(self.params.values())

    def state_dict(self):
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state_dict(self, state):
        missing = set(self.params) - set(state)
        if missing:
            raise ConfigurationError(f"state dict missing {sorted(missing)}")
        for k, p in self.params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.shape:
                raise ShapeError(f"parameter {k}: checkpoint {arr.shape} vs model {p.shape}")
            p.data = arr.copy()

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def _uniform(self, name, shape, bound, rng):
        self.params[name] = Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Encoder(Module):
    def __init__(self, config=None, seed=0):
        super().__init__()
        self.config = config or EncoderConfig()
        rng = np.random.default_rng(seed)
        cfg = self.config
        cin = 1
        for i, cout in enumerate(cfg.channels):
            fan_in = cin * cfg.kernel_size
            self._uniform(f"conv{i}.w", (cout, cin, cfg.kernel_size), math.sqrt(6.0 / fan_in), rng)
            self.params[f"conv{i}.b"] = Tensor(np.zeros(cout), requires_grad=True)
            cin = cout
        self._uniform("fc.w", (cin, cfg.embedding_dim), 1.0 / math.sqrt(cin), rng)
        self.params["fc.b"] = Tensor(np.zeros(cfg.embedding_dim), requires_grad=True)

    def _check_input(self, x):
        x = T.as_tensor(x)
        if x.ndim == 1:
            x = x.reshape(1, 1, -1)
        elif x.ndim == 2:
            x = x.reshape(x.shape[0], 1, x.shape[1])
        if x.shape[-1] != self.config.input_length:
            raise ShapeError(
                f"encoder expects segments of length {self.config.input_length}, got {x.shape}"
            )
        return x

    def features(self, x):
        """Convolutional feature map (B, C_last, T) before pooling."""
        h = self._check_input(x)
        pad = self.config.kernel_size // 2
        for i in range(len(self.config.channels)):
            h = T.relu(
                T.conv1d(h, self.params[f"conv{i}.w"], self.params[f"conv{i}.b"],
                         stride=self.config.stride, padding=pad)
            )
        return h

    def pool(self, fmap):
        return T.mean(fmap, axis=2) @ self.params["fc.w"] + self.params["fc.b"]

    def __call__(self, x):
        return self.pool(self.features(x))


class ProjectionHead(Module):
    """Two-layer MLP D -> D -> D used only during pretraining."""

    def __init__(self, dim, seed=0):
        super().__init__()
        rng = np.random.default_rng(seed)
        bound = 1.0 / math.sqrt(dim)
        self._uniform("proj1.w", (dim, dim), bound, rng)
        self.params["proj1.b"] = Tensor(np.zeros(dim), requires_grad=True)
        self._uniform("proj2.w", (dim, dim), bound, rng)
        self.params["proj2.b"] = Tensor(np.zeros(dim), requires_grad=True)

    def __call__(self, z):
        h = T.relu(z @ self.params["proj1.w"] + self.params["proj1.b"])
        return h @ self.params["proj2.w"] + self.params["proj2.b"]


class Decoder(Module):
    """Maps each feature-map step back to ``downsample`` samples (a 1x1
    convolution followed by unfolding), cropped to the segment length."""

    def __init__(self, config, seed=0):
        super().__init__()
        rng = np.random.default_rng(seed)
        c = config.channels[-1]
        self.length = config.input_length
        self.upsample = config.downsample
        self._uniform("dec.w", (c, self.upsample), 1.0 / math.sqrt(c), rng)
        self.params["dec.b"] = Tensor(np.zeros(self.upsample), requires_grad=True)

    def __call__(self, fmap):
        b, _, steps = fmap.shape
        out = T.transpose(fmap, (0, 2, 1)) @ self.params["dec.w"] + self.params["dec.b"]
        out = out.reshape(b, steps * self.upsample)
        if steps * self.upsample < self.length:
            raise ShapeError(f"decoder output {steps * self.upsample} shorter than {self.length}")
        return out[:, : self.length]


class SupervisedHead(Module):
    def __init__(self, dim, seed=0):
        super().__init__()
        rng = np.random.default_rng(seed)
        self._uniform("head.w", (dim, 1), 1.0 / math.sqrt(dim), rng)
        self.params["head.b"] = Tensor(np.zeros(1), requires_grad=True)

    def logits(self, z):
        return (z @ self.params["head.w"] + self.params["head.b"]).reshape(-1)

    def __call__(self, z):
        return T.sigmoid(self.logits(z))


def encode(encoder, segment):
    """Embedding of a single segment as a 1-D array."""
    with T.no_grad():
        return encoder(np.asarray(segment, dtype=np.float64)).data[0].copy()


def embed_segments(encoder, segments, batch_size=256):
    segments = np.asarray(segments, dtype=np.float64)
    if segments.ndim != 2:
        raise ShapeError(f"expected (n, {encoder.config.input_length}) segments, got {segments.shape}")
    out = np.empty((len(segments), encoder.config.embedding_dim))
    with T.no_grad():
        for start in range(0, len(segments), batch_size):
            out[start : start + batch_size] = encoder(segments[start : start + batch_size]).data
    return out


def bce_loss(p, y, eps=1e-12):
    """Mean binary cross-entropy of probabilities ``p`` against 0/1 targets ``y``."""
    p = T.clip(p, eps, 1.0 - eps)
    y = np.asarray(y, dtype=np.float64).reshape(p.shape)
    return -T.mean(y * T.log(p) + (1.0 - y) * T.log(1.0 - p))


# ------------------------------------------------------------ checkpoints


def save_encoder(path, encoder, extra=None, meta=None):
    arrays = encoder.state_dict()
    for mod in extra or ():
        arrays.update(mod.state_dict())
    info = {"encoder_config": asdict(encoder.config)}
    info.update(meta or {})
    checkpoint.save(path, arrays, info)


def load_encoder(path):
    arrays, meta = checkpoint.load(path)
    cfg = meta["encoder_config"]
    cfg["channels"] = tuple(cfg["channels"])
    enc = Encoder(EncoderConfig(**cfg))
    enc.load_state_dict(arrays)
    return enc, arrays, meta


def write_embeddings_csv(path, segment_ids, embeddings):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["segment_id"] + [f"e{k}" for k in range(embeddings.shape[1])])
        for sid, row in zip(segment_ids, embeddings):
            w.writerow([sid] + [repr(float(v)) for v in row])


# ------------------------------------------------------------ supervised baseline


@dataclass(frozen=True)
class TrainRecipe:
    lr: float = 1e-3
    max_epochs: int = 30
    batch_size: int = 32
    patience: int = 5
    eta_min: float = 0.0
    clip_norm: float | None = None
    seed: int = 0


@dataclass
class SupervisedResult:
    encoder: Encoder
    head: SupervisedHead
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = 0

    def predict_proba(self, segments, batch_size=256):
        z = embed_segments(self.encoder, segments, batch_size)
        with T.no_grad():
            return self.head(z).data.copy()


def train_supervised(x_train, y_train, x_val, y_val, config=None, recipe=None):
    """Train encoder + head end to end; returns the best-validation checkpoint.

    BCE, Adam at ``recipe.lr``, cosine annealing over ``max_epochs`` worth of
    steps, early stopping once validation loss stops improving.
    """
    config = config or EncoderConfig()
    recipe = recipe or TrainRecipe()
    y_train = np.asarray(y_train, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    if len(np.unique(y_train)) < 2:
        raise ConfigurationError("supervised training needs both classes in the training set")
    x_train = np.asarray(x_train, dtype=np.float64)
    x_val = np.asarray(x_val, dtype=np.float64)

    encoder = Encoder(config, seed=recipe.seed)
    head = SupervisedHead(config.embedding_dim, seed=recipe.seed + 1)
    params = encoder.parameters() + head.parameters()
    state = AdamState.for_params(params, lr0=recipe.lr)
    n = len(x_train)
    n_batches = math.ceil(n / recipe.batch_size)
    sched = CosineSchedule(recipe.lr, recipe.max_epochs * n_batches, recipe.eta_min)
    stopper = EarlyStopper(patience=recipe.patience)
    rng = np.random.default_rng(recipe.seed)

    result = SupervisedResult(encoder, head)
    best = None
    step = 0
    for epoch in range(recipe.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for b in range(n_batches):
            idx = order[b * recipe.batch_size : (b + 1) * recipe.batch_size]
            for p in params:
                p.grad = None
            loss = bce_loss(head(encoder(x_train[idx])), y_train[idx])
            loss.backward()
            grads = [p.grad for p in params]
            if recipe.clip_norm:
                clip_grad_norm(grads, recipe.clip_norm)
            adam_step(params, grads, state, cosine_lr(step, sched))
            step += 1
            total += loss.item() * len(idx)
        result.train_losses.append(total / n)
        with T.no_grad():
            val = bce_loss(head(encoder(x_val)), y_val).item() if len(x_val) else total / n
        result.val_losses.append(val)
        if stopper.best_index < 0 or val < stopper.best_loss:
            best = (encoder.state_dict(), head.state_dict())
        if early_stop_update(stopper, val) == STOP:
            break
    encoder.load_state_dict(best[0])
    head.load_state_dict(best[1])
    result.best_epoch = stopper.best_epoch
    log.debug("supervised: %d epochs, best %d", len(result.val_losses), result.best_epoch)
    return result
