"""Label-free encoder pretraining under the seven objectives."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ecgssl.encoder import Decoder, Encoder, EncoderConfig, ProjectionHead
from ecgssl.errors import ConfigurationError
from ecgssl.numcore import tensor as T
from ecgssl.numcore.optim import AdamState, CosineSchedule, adam_step, clip_grad_norm, cosine_lr
from ecgssl.sigproc import SegmentTable, build_segment_table
from ecgssl.ssl import losses
from ecgssl.ssl import samplers as S

log = logging.getLogger(__name__)

METHODS = ("simclr", "mixup", "clocs", "pclr", "deaps", "mtae", "nerula")
CONTRASTIVE = ("simclr", "mixup", "clocs", "pclr")


@dataclass(frozen=True)
class PretrainConfig:
    method: str = "pclr"
    epochs: int = 10
    batches_per_epoch: int = 10
    batch_size: int = 64  # pairs (contrastive), triplets or segments
    temperature: float = 0.1
    lr: float = 1e-3
    eta_min: float = 0.0
    beta_alpha: float = 0.5
    mixup_source: str = "same_recording"
    patch_length: int = 50
    mask_ratio: float = 0.5
    nerula_lambda: float = 1.0
    deaps_variance: float = 1.0
    deaps_covariance: float = 1.0
    deaps_dynamics: float = 1.0
    deaps_margin: float = 1.0
    gap_near_s: float = 10.0
    gap_far_s: float = 120.0
    jitter_std: float = 0.05
    scale_low: float = 0.8
    scale_high: float = 1.25
    crop_fraction: float = 0.1
    clip_norm: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.temperature <= 0:
            raise ConfigurationError("temperature must be positive")
        if self.batch_size < 2:
            raise ConfigurationError("batch size must be at least 2")
        if self.epochs < 1 or self.batches_per_epoch < 1:
            raise ConfigurationError("epochs and batches_per_epoch must be positive")

    @property
    def augmentations(self):
        return S.Augmentations(self.jitter_std, self.scale_low, self.scale_high, self.crop_fraction)

    @property
    def mask_spec(self):
        return S.MaskSpec(self.patch_length, self.mask_ratio)


@dataclass
class PretrainResult:
    encoder: Encoder
    heads: dict
    losses: list = field(default_factory=list)
    pair_counts: list = field(default_factory=list)
    method: str = ""


def strip_labels(recordings):
    """Label-free copies: the pretraining path never holds a label value."""
    return [dataclasses.replace(r, label=None) for r in recordings]


def unlabeled_table(data):
    if isinstance(data, SegmentTable):
        return dataclasses.replace(data, labels=np.full(len(data), -1, dtype=np.int64))
    return build_segment_table(strip_labels(data))


class _Objective:
    """Sampler + loss for one method; ``loss(rng)`` draws a batch and
    returns ``(loss tensor, n_pairs)``."""

    def __init__(self, table, cfg, encoder):
        self.table, self.cfg, self.encoder = table, cfg, encoder
        d = encoder.config.embedding_dim
        self.heads = {}
        if cfg.method in CONTRASTIVE or cfg.method in ("deaps", "nerula"):
            self.heads["projector"] = ProjectionHead(d, seed=cfg.seed + 101)
        if cfg.method in ("mtae", "nerula"):
            self.heads["decoder"] = Decoder(encoder.config, seed=cfg.seed + 202)
        self._prepare()

    def _prepare(self):
        m, t, cfg = self.cfg.method, self.table, self.cfg
        if m == "clocs":
            self.pool = S.clocs_pair_pool(t)
        elif m == "pclr":
            self.eligible = S.pclr_eligible(t)
        elif m == "deaps":
            self.candidates = S.triplet_candidates(t, cfg.gap_near_s, cfg.gap_far_s)
        elif m == "mixup":
            S.sample_mixup_sources(t, 1, np.random.default_rng(0), cfg.mixup_source)

    def parameters(self):
        out = self.encoder.parameters()
        for h in self.heads.values():
            out += h.parameters()
        return out

    def _project(self, x):
        return self.heads["projector"](self.encoder(x))

    def loss(self, rng):
        cfg, t, n = self.cfg, self.table, self.cfg.batch_size
        m = cfg.method
        if m == "simclr":
            idx = rng.choice(len(t), size=n, replace=len(t) < n)
            batch = S.sample_simclr_pairs(t.values, idx, cfg.augmentations, rng)
            return losses.nt_xent_loss(self._project(batch.views), cfg.temperature), n
        if m == "clocs":
            batch = S.sample_clocs_pairs(t, n, rng, self.pool)
            return losses.nt_xent_loss(self._project(batch.views), cfg.temperature), n
        if m == "pclr":
            batch = S.sample_pclr_pairs(t, n, rng, self.eligible)
            return losses.nt_xent_loss(self._project(batch.views), cfg.temperature), n
        if m == "mixup":
            src = S.sample_mixup_sources(t, n, rng, cfg.mixup_source)
            x1, x2 = t.values[src[:, 0]], t.values[src[:, 1]]
            lam = rng.beta(cfg.beta_alpha, cfg.beta_alpha, size=(n, 1))
            mixed, _ = S.mixup_views(x1, x2, lam=lam)
            z = self._project(np.concatenate([x1, x2, mixed]))
            return losses.mixup_contrastive_loss(z[:n], z[n : 2 * n], z[2 * n :], cfg.temperature), n
        if m == "deaps":
            trip = S.sample_deaps_triplets(t, n, rng, self.candidates, cfg.gap_near_s, cfg.gap_far_s)
            z = self._project(t.values[np.concatenate([trip.anchor, trip.near, trip.far])])
            w = losses.DeapsWeights(cfg.deaps_variance, cfg.deaps_covariance,
                                    cfg.deaps_dynamics, cfg.deaps_margin)
            return losses.deaps_loss(z[:n], z[n : 2 * n], z[2 * n :], w), n
        if m == "mtae":
            idx = rng.choice(len(t), size=n, replace=len(t) < n)
            x = t.values[idx]
            mask = np.stack([S.patch_mask(x.shape[1], cfg.mask_spec, rng) for _ in range(n)])
            recon = self.heads["decoder"](self.encoder.features(np.where(mask, 0.0, x)))
            return losses.mtae_loss(recon, x, mask), n
        if m == "nerula":
            idx = rng.choice(len(t), size=n, replace=len(t) < n)
            x = t.values[idx]
            mask_a, _ = S.complementary_masks(n, x.shape[1], cfg.mask_spec, rng)
            return losses.nerula_loss(
                x, mask_a, self.encoder, self.heads["decoder"], self.heads["projector"],
                losses.NerulaWeights(cfg.nerula_lambda),
            ), n
        raise ConfigurationError(f"unknown method {m!r}")


def pretrain(data, config=None, encoder_config=None):
    """Pretrain an encoder on unlabeled recordings (or a prebuilt segment table).

    Adam + cosine annealing over ``epochs * batches_per_epoch`` steps.  Returns
    the encoder, the auxiliary heads and the per-epoch mean loss.
    """
    cfg = config or PretrainConfig()
    table = unlabeled_table(data)
    encoder = Encoder(encoder_config or EncoderConfig(), seed=cfg.seed)
    objective = _Objective(table, cfg, encoder)
    params = objective.parameters()
    state = AdamState.for_params(params, lr0=cfg.lr)
    total = cfg.epochs * cfg.batches_per_epoch
    sched = CosineSchedule(cfg.lr, total, cfg.eta_min)
    rng = np.random.default_rng(cfg.seed)
    result = PretrainResult(encoder, objective.heads, method=cfg.method)
    step = 0
    for epoch in range(cfg.epochs):
        batch_losses, pairs = [], 0
        for _ in range(cfg.batches_per_epoch):
            for p in params:
                p.grad = None
            loss, n = objective.loss(rng)
            loss.backward()
            grads = [p.grad for p in params]
            if cfg.clip_norm:
                clip_grad_norm(grads, cfg.clip_norm)
            adam_step(params, grads, state, cosine_lr(step, sched))
            step += 1
            batch_losses.append(loss.item())
            pairs += n
        result.losses.append(float(np.mean(batch_losses)))
        result.pair_counts.append(pairs)
        log.info("%s epoch %d/%d loss %.4f", cfg.method, epoch + 1, cfg.epochs, result.losses[-1])
        if not math.isfinite(result.losses[-1]):
            break
    return result


def initial_loss(data, config=None, encoder_config=None):
    """Loss of one batch under freshly initialized weights (no update)."""
    cfg = config or PretrainConfig()
    table = unlabeled_table(data)
    encoder = Encoder(encoder_config or EncoderConfig(), seed=cfg.seed)
    objective = _Objective(table, cfg, encoder)
    with T.no_grad():
        loss, _ = objective.loss(np.random.default_rng(cfg.seed))
    return loss.item()
