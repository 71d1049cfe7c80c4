"""Pretraining objectives built on the autodiff tensors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ecgssl.errors import ConfigurationError, NumericError, ShapeError
from ecgssl.numcore import tensor as T


def cosine_sim(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise NumericError("cosine similarity is undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def partner_index(n_rows):
    """Index of each row's positive partner when pairs sit at (2k, 2k+1)."""
    return np.arange(n_rows) ^ 1


def nt_xent_loss(z, tau=0.1):
    """Normalized temperature-scaled cross entropy over 2N embeddings.

    Rows (2k, 2k+1) are positive pairs.  For anchor i with partner j the term
    is -log(exp(s_ij/tau) / sum_{k != i} exp(s_ik/tau)) with s the cosine
    similarity; the loss is the mean over all 2N anchors.
    """
    if tau <= 0:
        raise ConfigurationError(f"temperature must be positive, got {tau}")
    z = T.as_tensor(z)
    if z.ndim != 2 or z.shape[0] % 2 or z.shape[0] < 4:
        raise ShapeError(f"nt_xent needs an even number (>= 4) of embedding rows, got {z.shape}")
    n2 = z.shape[0]
    zn = T.l2_normalize(z, axis=1)
    logits = (zn @ T.transpose(zn)) * (1.0 / tau)
    self_mask = np.where(np.eye(n2, dtype=bool), -np.inf, 0.0)
    denom = T.logsumexp(logits + self_mask, axis=1)
    onehot = np.zeros((n2, n2))
    onehot[np.arange(n2), partner_index(n2)] = 1.0
    positive = T.sum_(logits * onehot, axis=1)
    return T.mean(denom - positive)


def mixup_contrastive_loss(z1, z2, zmix, tau=0.1):
    """Contrast each source strip with the mixture built from it:
    mean of NT-Xent over pairs (x1_k, mix_k) and over pairs (x2_k, mix_k)."""
    return 0.5 * (nt_xent_loss(interleave(z1, zmix), tau) + nt_xent_loss(interleave(z2, zmix), tau))


def interleave(a, b):
    """Stack two (N, D) tensors into (2N, D) with a[k], b[k] at rows 2k, 2k+1."""
    a, b = T.as_tensor(a), T.as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"interleave: shapes {a.shape} and {b.shape} differ")
    n, d = a.shape
    return T.reshape(T.concat([a.reshape(n, 1, d), b.reshape(n, 1, d)], axis=1), (2 * n, d))


@dataclass(frozen=True)
class DeapsWeights:
    variance: float = 1.0
    covariance: float = 1.0
    dynamics: float = 1.0
    margin: float = 1.0


_STD_EPS = 1e-12


def deaps_terms(z_anchor, z_near, z_far, weights=None):
    """Invariance, variance, covariance and temporal-dynamics terms.

    * invariance: mean squared distance between anchor and near strips
    * variance: sum over dimensions of max(0, 1 - std_d) over the whole batch
    * covariance: sum of squared off-diagonal batch covariances
    * dynamics: mean of max(0, margin - ||anchor - far||)
    """
    weights = weights or DeapsWeights()
    za, zn, zf = T.as_tensor(z_anchor), T.as_tensor(z_near), T.as_tensor(z_far)
    if za.shape != zn.shape or za.shape != zf.shape:
        raise ShapeError(f"deaps: triplet shapes {za.shape}, {zn.shape}, {zf.shape} differ")
    if za.shape[0] < 4:
        raise ConfigurationError(f"deaps needs at least 4 triplets per batch, got {za.shape[0]}")
    inv = T.mean(T.sum_(T.square(za - zn), axis=1))
    z = T.concat([za, zn, zf], axis=0)
    centered = z - T.mean(z, axis=0, keepdims=True)
    var = T.mean(T.square(centered), axis=0)
    var_term = T.sum_(T.relu(1.0 - T.sqrt(var + _STD_EPS)))
    n = z.shape[0]
    cov = (T.transpose(centered) @ centered) * (1.0 / (n - 1))
    off = 1.0 - np.eye(z.shape[1])
    cov_term = T.sum_(T.square(cov * off))
    dist = T.sqrt(T.sum_(T.square(za - zf), axis=1) + _STD_EPS)
    dyn = T.mean(T.relu(weights.margin - dist))
    return {"invariance": inv, "variance": var_term, "covariance": cov_term, "dynamics": dyn}


def deaps_loss(z_anchor, z_near, z_far, weights=None):
    weights = weights or DeapsWeights()
    t = deaps_terms(z_anchor, z_near, z_far, weights)
    return (
        t["invariance"]
        + weights.variance * t["variance"]
        + weights.covariance * t["covariance"]
        + weights.dynamics * t["dynamics"]
    )


def mtae_loss(prediction, target, mask):
    """Mean squared error over masked samples only."""
    prediction = T.as_tensor(prediction)
    target = np.asarray(T.as_tensor(target).data)
    mask = np.asarray(mask, dtype=bool)
    if prediction.shape != target.shape or mask.shape != target.shape:
        raise ShapeError(
            f"mtae: prediction {prediction.shape}, target {target.shape}, mask {mask.shape}"
        )
    count = int(mask.sum())
    if count == 0:
        raise ConfigurationError("mtae loss is undefined for an empty mask")
    w = mask.astype(np.float64)
    return T.sum_(T.square(prediction - target) * w) * (1.0 / count)


@dataclass(frozen=True)
class NerulaWeights:
    discriminative: float = 1.0


def nerula_branches(segments, mask_a, encoder, decoder, projector):
    """Forward both masked views.

    Returns (reconstruction of view a, projection of view a, projection of
    view b); the caller decides what to detach.
    """
    x = np.asarray(segments, dtype=np.float64)
    mask_a = np.asarray(mask_a, dtype=bool)
    view_a = np.where(mask_a, 0.0, x)
    view_b = np.where(~mask_a, 0.0, x)
    both = np.concatenate([view_a, view_b])
    fmap = encoder.features(both)
    n = len(x)
    fmap_a = fmap[:n]
    recon = decoder(fmap_a)
    proj = T.l2_normalize(projector(encoder.pool(fmap)), axis=1)
    return recon, proj[:n], proj[n:]


def nerula_loss(segments, mask_a, encoder, decoder, projector, weights=None, frozen_target=None):
    """Reconstruction of the first masked view plus stop-gradient alignment of
    the two complementary views' projections.

    ``frozen_target`` replaces the (already detached) view-b projection; it
    exists so gradient checks can hold the target fixed.
    """
    weights = weights or NerulaWeights()
    mask_a = np.asarray(mask_a, dtype=bool)
    if not mask_a.any():
        raise ConfigurationError("nerula needs a non-empty first mask")
    recon, pa, pb = nerula_branches(segments, mask_a, encoder, decoder, projector)
    target = T.stop_gradient(pb) if frozen_target is None else T.as_tensor(frozen_target)
    l_recon = mtae_loss(recon, np.asarray(segments, dtype=np.float64), mask_a)
    l_disc = T.mean(T.sum_(T.square(pa - target), axis=1))
    return l_recon + weights.discriminative * l_disc
