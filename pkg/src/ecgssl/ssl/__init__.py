"""Self-supervised pretraining objectives, samplers and the training loop."""

from ecgssl.ssl.losses import (
    DeapsWeights,
    NerulaWeights,
    cosine_sim,
    deaps_loss,
    deaps_terms,
    mixup_contrastive_loss,
    mtae_loss,
    nerula_loss,
    nt_xent_loss,
)
from ecgssl.ssl.pretrain import METHODS, PretrainConfig, PretrainResult, initial_loss, pretrain
from ecgssl.ssl.samplers import (
    Augmentations,
    MaskSpec,
    PositivePairBatch,
    TripletBatch,
    apply_mask,
    complementary_masks,
    mixup_views,
    sample_clocs_pairs,
    sample_deaps_triplets,
    sample_pclr_pairs,
    sample_simclr_pairs,
)

__all__ = [name for name in dir() if not name.startswith("_")]
