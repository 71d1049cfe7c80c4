import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ecgssl.errors import ConfigurationError, NumericError, ShapeError
from ecgssl.numcore import tensor as T
from ecgssl.ssl import losses as L
from ecgssl.ssl import samplers as S
from oracles import nt_xent_bruteforce

LOG3 = 1.0986122886681098
ORTHO_PAIRS = 0.5514447139320511  # -log(e / (e + 2))


def test_cosine_sim_cases():
    z = np.array([1.0, 2.0, -0.5])
    assert L.cosine_sim(z, z) == pytest.approx(1.0)
    assert L.cosine_sim(z, -z) == pytest.approx(-1.0)
    assert L.cosine_sim([1, 0], [0, 1]) == 0.0
    with pytest.raises(NumericError):
        L.cosine_sim([0, 0], [1, 0])


def test_nt_xent_identical_embeddings():
    assert L.nt_xent_loss(np.ones((4, 3)), 0.5).item() == pytest.approx(LOG3, abs=1e-9)
    assert L.nt_xent_loss(np.ones((16, 5)), 0.1).item() == pytest.approx(math.log(15), abs=1e-9)


def test_nt_xent_orthogonal_pairs():
    z = np.array([[1.0, 0], [1.0, 0], [0, 1.0], [0, 1.0]])
    assert L.nt_xent_loss(z, 1.0).item() == pytest.approx(ORTHO_PAIRS, abs=1e-9)


@given(st.integers(0, 2**31), st.integers(2, 8), st.sampled_from([0.05, 0.1, 0.5, 1.0]))
def test_nt_xent_matches_bruteforce(seed, n, tau):
    z = np.random.default_rng(seed).standard_normal((2 * n, 6))
    assert abs(L.nt_xent_loss(z, tau).item() - nt_xent_bruteforce(z, tau)) <= 1e-9


@given(st.integers(0, 2**31), st.integers(2, 6), st.floats(0.01, 100))
def test_nt_xent_pair_permutation_and_scale_invariance(seed, n, c):
    r = np.random.default_rng(seed)
    z = r.standard_normal((2 * n, 4))
    perm = r.permutation(n)
    zp = z.reshape(n, 2, 4)[perm].reshape(2 * n, 4)
    base = L.nt_xent_loss(z, 0.2).item()
    assert abs(L.nt_xent_loss(zp, 0.2).item() - base) <= 1e-9
    assert abs(L.nt_xent_loss(c * z, 0.2).item() - base) <= 1e-9


def test_nt_xent_validation():
    with pytest.raises(ConfigurationError):
        L.nt_xent_loss(np.ones((4, 2)), 0.0)
    with pytest.raises(ShapeError):
        L.nt_xent_loss(np.ones((5, 2)), 0.1)


def test_mixup_loss_is_mean_of_two_ntxent(rng):
    z1, z2, zm = (rng.standard_normal((3, 4)) for _ in range(3))
    a = nt_xent_bruteforce(L.interleave(z1, zm).data, 0.3)
    b = nt_xent_bruteforce(L.interleave(z2, zm).data, 0.3)
    assert L.mixup_contrastive_loss(z1, z2, zm, 0.3).item() == pytest.approx(0.5 * (a + b), abs=1e-12)


def test_interleave_layout():
    a, b = np.zeros((2, 1)), np.ones((2, 1))
    np.testing.assert_array_equal(L.interleave(a, b).data.ravel(), [0, 1, 0, 1])


def test_deaps_invariance_zero_when_anchor_equals_near(rng):
    a = rng.standard_normal((6, 4))
    assert L.deaps_terms(a, a.copy(), rng.standard_normal((6, 4)))["invariance"].item() == 0.0


def test_deaps_identical_embeddings_hand_values():
    z = np.full((5, 7), 0.3)
    t = L.deaps_terms(z, z, z, L.DeapsWeights(margin=2.0))
    assert t["variance"].item() == pytest.approx(7.0, abs=1e-5)
    assert t["dynamics"].item() == pytest.approx(2.0, abs=1e-5)
    assert t["covariance"].item() == pytest.approx(0.0, abs=1e-12)


def test_deaps_needs_four_triplets():
    with pytest.raises(ConfigurationError):
        L.deaps_loss(np.ones((3, 2)), np.ones((3, 2)), np.ones((3, 2)))


def test_mtae_cases(rng):
    x = rng.standard_normal((2, 10))
    mask = np.zeros((2, 10), dtype=bool)
    mask[:, :5] = True
    assert L.mtae_loss(x, x, mask).item() == 0.0
    y = x.copy()
    y[~mask] += 3.0
    assert L.mtae_loss(y, x, mask).item() == 0.0
    assert L.mtae_loss(np.ones((2, 10)), np.zeros((2, 10)), mask).item() == pytest.approx(1.0)
    with pytest.raises(ConfigurationError):
        L.mtae_loss(x, x, np.zeros((2, 10), dtype=bool))


def test_losses_nonnegative(rng):
    z = rng.standard_normal((8, 5))
    assert L.nt_xent_loss(z).item() >= 0
    assert L.deaps_loss(z, z[::-1], z * 2).item() >= 0


# ---------------------------------------------------------------- samplers


def test_simclr_disabled_augmentations_identity(small_table):
    batch = S.sample_simclr_pairs(small_table.values, [0, 3], S.Augmentations.disabled(),
                                  np.random.default_rng(0))
    np.testing.assert_array_equal(batch.views[0], batch.views[1])
    assert batch.views.shape == (4, 1000)


def test_simclr_reproducible(small_table):
    def run():
        return S.sample_simclr_pairs(small_table.values, [1, 2], S.Augmentations(),
                                     np.random.default_rng(5)).views

    np.testing.assert_array_equal(run(), run())


def test_mixup_endpoints_and_mean(rng):
    x1, x2 = rng.standard_normal(10), rng.standard_normal(10)
    np.testing.assert_array_equal(S.mixup_views(x1, x2, lam=1.0)[0], x1)
    np.testing.assert_array_equal(S.mixup_views(x1, x2, lam=0.0)[0], x2)
    r = np.random.default_rng(0)
    lams = [S.mixup_views(x1, x2, 0.5, r)[1] for _ in range(10000)]
    assert abs(np.mean(lams) - 0.5) <= 0.02


def test_mixup_sources_distinct(small_table):
    pairs = S.sample_mixup_sources(small_table, 50, np.random.default_rng(0))
    assert np.all(pairs[:, 0] != pairs[:, 1])
    assert np.all(small_table.recording_ids[pairs[:, 0]] == small_table.recording_ids[pairs[:, 1]])


def test_clocs_pool_arithmetic():
    from ecgssl.sigproc import CleanRecording, build_segment_table

    r = CleanRecording("p", "p_v0", 100.0, np.random.default_rng(0).standard_normal(180_000), 0)
    pool = S.clocs_pair_pool(build_segment_table([r]))
    assert len(pool) == 90


def test_clocs_pairs_adjacent_same_recording(small_table):
    batch = S.sample_clocs_pairs(small_table, 40, np.random.default_rng(1))
    a, b = batch.pair_index.T
    assert np.all(small_table.recording_ids[a] == small_table.recording_ids[b])
    assert np.all(small_table.start_index[b] - small_table.start_index[a] == 1000)  # gap 0 s


def test_pclr_pairs_cross_recording_same_patient(small_table):
    batch = S.sample_pclr_pairs(small_table, 8, np.random.default_rng(2))
    a, b = batch.pair_index.T
    assert np.all(small_table.patient_ids[a] == small_table.patient_ids[b])
    assert np.all(small_table.recording_ids[a] != small_table.recording_ids[b])
    assert len(set(small_table.patient_ids[a])) == 8


def test_pclr_single_recording_patient_contributes_nothing(small_table):
    keep = ~((small_table.patient_ids == "sub0000") & (small_table.recording_ids == "sub0000_v1"))
    eligible = S.pclr_eligible(small_table.subset(keep))
    assert "sub0000" not in eligible
    only = small_table.subset(small_table.recording_ids == "sub0001_v0")
    with pytest.raises(ConfigurationError, match="sub0001"):
        S.pclr_eligible(only)


def test_deaps_triplets_same_recording_and_gaps(small_table):
    batch = S.sample_deaps_triplets(small_table, 30, np.random.default_rng(0), gap_near_s=10, gap_far_s=40)
    for a, n, f in zip(batch.anchor, batch.near, batch.far):
        assert small_table.recording_ids[a] == small_table.recording_ids[n] == small_table.recording_ids[f]
        assert 0 < abs(small_table.start_index[n] - small_table.start_index[a]) <= 1000
        assert abs(small_table.start_index[f] - small_table.start_index[a]) >= 4000
    with pytest.raises(ConfigurationError):
        S.triplet_candidates(small_table, 10, 5)


def test_mask_ratio_cases():
    x = np.arange(1.0, 1001.0)
    out, mask = S.apply_mask(x, S.MaskSpec(50, 0.0), seed=0)
    np.testing.assert_array_equal(out, x)
    assert not mask.any()
    _, mask = S.apply_mask(x, S.MaskSpec(50, 1.0), seed=0)
    assert mask.all()
    out, mask = S.apply_mask(x, S.MaskSpec(50, 0.5), seed=0)
    assert mask.reshape(20, 50).all(axis=1).sum() == 10
    assert np.all(out[mask] == 0)


@given(st.integers(0, 2**31), st.floats(0, 1), st.sampled_from([10, 25, 50, 64]))
def test_mask_fraction_within_one_patch(seed, ratio, patch):
    spec = S.MaskSpec(patch, ratio)
    _, mask = S.apply_mask(np.ones(1000), spec, seed=seed)
    assert abs(mask.mean() - ratio) <= patch / 1000 + 1e-12
    a, b = S.complementary_masks(3, 1000, spec, np.random.default_rng(seed))
    np.testing.assert_array_equal(b, ~a)


def test_nerula_disc_zero_for_identical_branches(rng):
    from ecgssl.encoder import Decoder, Encoder, EncoderConfig, ProjectionHead

    cfg = EncoderConfig(channels=(4,), embedding_dim=4)
    enc, dec, proj = Encoder(cfg, 0), Decoder(cfg, 1), ProjectionHead(4, 2)
    x = rng.standard_normal((2, 1000))
    mask = np.zeros((2, 1000), dtype=bool)
    mask[:, :500] = True
    recon, pa, pb = L.nerula_branches(x, mask, enc, dec, proj)
    full = L.nerula_loss(x, mask, enc, dec, proj, frozen_target=pa.data)
    l_recon = L.mtae_loss(recon, x, mask)
    assert full.item() == pytest.approx(l_recon.item(), abs=1e-12)
    with T.no_grad():
        assert np.allclose(np.linalg.norm(pa.data, axis=1), 1.0)
