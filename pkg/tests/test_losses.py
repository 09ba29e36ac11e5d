"""Contrastive losses against a literal double-loop oracle and closed forms."""

import math

import numpy as np
import pytest

from emoclim.errors import ConfigurationError, EmptyPositivesError
from emoclim.losses import (
    LabeledBatch,
    LossConfig,
    supcon_cross,
    supcon_intra,
    total_loss,
)


def naive_supcon_cross(z1, y1, z2, y2, tau):
    """Direct transcription of the cross-modal anchor loss definition."""
    n = len(y1)
    total = 0.0
    contributing = 0
    for i in range(n):
        positives = [p for p in range(n) if y1[i] == y2[p]]
        if not positives:
            continue
        contributing += 1
        inner = 0.0
        for p in positives:
            numerator = math.exp(float(z1[i] @ z2[p]) / tau)
            denominator = sum(math.exp(float(z1[i] @ z2[k]) / tau) for k in range(n))
            inner += math.log(numerator / denominator)
        total += inner / len(positives)
    if contributing == 0:
        raise EmptyPositivesError("oracle: no positives")
    return -total / contributing


def naive_supcon_intra(z, y, tau):
    """Same transcription with one modality and self-pairs excluded."""
    n = len(y)
    total = 0.0
    contributing = 0
    for i in range(n):
        positives = [p for p in range(n) if p != i and y[i] == y[p]]
        if not positives:
            continue
        contributing += 1
        inner = 0.0
        for p in positives:
            numerator = math.exp(float(z[i] @ z[p]) / tau)
            denominator = sum(math.exp(float(z[i] @ z[k]) / tau)
                              for k in range(n) if k != i)
            inner += math.log(numerator / denominator)
        total += inner / len(positives)
    if contributing == 0:
        raise EmptyPositivesError("oracle: no positives")
    return -total / contributing


def random_unit_rows(rng, n, d):
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def random_batch(rng, n, d=8, n_classes=6):
    z1 = random_unit_rows(rng, n, d)
    z2 = random_unit_rows(rng, n, d)
    y1 = rng.integers(0, n_classes, n)
    y2 = rng.integers(0, n_classes, n)
    return z1, y1, z2, y2


class TestSupconCross:
    def test_uniform_closed_form_ln_n(self):
        # Identical embeddings and one shared label: every softmax term 1/N.
        for n in (2, 4, 8):
            z = np.tile(random_unit_rows(np.random.default_rng(0), 1, 6), (n, 1))
            y = np.zeros(n, dtype=int)
            loss, _, _ = supcon_cross(z, y, z.copy(), y, tau=0.07)
            assert abs(loss - math.log(n)) < 1e-6
        assert abs(math.log(4) - 1.3863) < 1e-4

    def test_two_item_hand_case(self):
        z = np.array([[1.0, 0.0], [0.0, 1.0]])
        y = np.array(["a", "b"], dtype=object)
        loss, _, _ = supcon_cross(z, y, z.copy(), y, tau=1.0)
        expected = -math.log(math.e / (math.e + 1.0))
        assert abs(expected - 0.3133) < 1e-4
        assert abs(loss - expected) < 1e-6
        assert abs(loss - naive_supcon_cross(z, y, z, y, 1.0)) < 1e-9

    @pytest.mark.parametrize("n", [2, 4, 16, 64])
    def test_matches_double_loop_oracle(self, n):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            z1, y1, z2, y2 = random_batch(rng, n)
            try:
                expected = naive_supcon_cross(z1, y1, z2, y2, 0.07)
            except EmptyPositivesError:
                with pytest.raises(EmptyPositivesError):
                    supcon_cross(z1, y1, z2, y2, 0.07)
                continue
            loss, _, _ = supcon_cross(z1, y1, z2, y2, 0.07)
            assert abs(loss - expected) < 1e-6

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(3)
        z1, y1, z2, y2 = random_batch(rng, 6, d=5)
        _, g1, g2 = supcon_cross(z1, y1, z2, y2, 0.5)
        eps = 1e-6
        for z, g in ((z1, g1), (z2, g2)):
            flat, gflat = z.reshape(-1), g.reshape(-1)
            for i in range(0, flat.size, 3):
                old = flat[i]
                flat[i] = old + eps
                lp = naive_supcon_cross(z1, y1, z2, y2, 0.5)
                flat[i] = old - eps
                lm = naive_supcon_cross(z1, y1, z2, y2, 0.5)
                flat[i] = old
                numeric = (lp - lm) / (2 * eps)
                assert abs(gflat[i] - numeric) / max(abs(gflat[i]), abs(numeric), 1e-8) < 1e-4

    def test_bad_temperature(self):
        z = random_unit_rows(np.random.default_rng(0), 4, 4)
        y = np.zeros(4, dtype=int)
        with pytest.raises(ConfigurationError):
            supcon_cross(z, y, z, y, tau=0.0)

    def test_all_anchors_skipped(self):
        z = random_unit_rows(np.random.default_rng(0), 2, 4)
        with pytest.raises(EmptyPositivesError):
            supcon_cross(z, np.array(["a", "a"]), z, np.array(["b", "b"]), 0.07)

    def test_nonnegative(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            z1, y1, z2, y2 = random_batch(rng, 16)
            try:
                loss, _, _ = supcon_cross(z1, y1, z2, y2, 0.07)
            except EmptyPositivesError:
                continue
            assert loss >= 0.0


class TestSupconIntra:
    def test_no_same_label_pair_raises(self):
        z = random_unit_rows(np.random.default_rng(0), 2, 4)
        with pytest.raises(EmptyPositivesError):
            supcon_intra(z, np.array(["a", "b"]), 0.07)

    def test_three_item_hand_case(self):
        # Orthonormal embeddings, labels [a, a, b]: anchors 1 and 2 see one
        # positive and one negative, both at logit 0 -> per-anchor ln 2;
        # anchor 3 is skipped.
        z = np.eye(3)
        y = np.array(["a", "a", "b"], dtype=object)
        loss, _ = supcon_intra(z, y, tau=1.0)
        assert abs(loss - math.log(2)) < 1e-6
        assert abs(loss - naive_supcon_intra(z, y, 1.0)) < 1e-9

    @pytest.mark.parametrize("n", [2, 4, 16, 64])
    def test_matches_double_loop_oracle(self, n):
        for seed in range(50):
            rng = np.random.default_rng(1000 + seed)
            z = random_unit_rows(rng, n, 8)
            y = rng.integers(0, 6, n)
            try:
                expected = naive_supcon_intra(z, y, 0.07)
            except EmptyPositivesError:
                with pytest.raises(EmptyPositivesError):
                    supcon_intra(z, y, 0.07)
                continue
            loss, _ = supcon_intra(z, y, 0.07)
            assert abs(loss - expected) < 1e-6

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        z = random_unit_rows(rng, 6, 5)
        y = np.array([0, 0, 1, 1, 2, 2])
        _, g = supcon_intra(z, y, 0.5)
        eps = 1e-6
        flat, gflat = z.reshape(-1), g.reshape(-1)
        for i in range(0, flat.size, 3):
            old = flat[i]
            flat[i] = old + eps
            lp = naive_supcon_intra(z, y, 0.5)
            flat[i] = old - eps
            lm = naive_supcon_intra(z, y, 0.5)
            flat[i] = old
            numeric = (lp - lm) / (2 * eps)
            assert abs(gflat[i] - numeric) / max(abs(gflat[i]), abs(numeric), 1e-8) < 1e-4


def make_batch(rng, n=12, d=8):
    z_img = random_unit_rows(rng, n, d)
    z_au = random_unit_rows(rng, n, d)
    y_img = rng.integers(0, 3, n)
    y_au = rng.integers(0, 3, n)
    return LabeledBatch(z_img, y_img, z_au, y_au)


class TestTotalLoss:
    def test_single_weight_selects_component(self):
        rng = np.random.default_rng(0)
        batch = make_batch(rng)
        cfg = LossConfig(temperature=0.07, lambdas=(1.0, 0.0, 0.0, 0.0))
        result = total_loss(batch, cfg)
        expected, g1, g2 = supcon_cross(batch.image_embeddings, batch.image_labels,
                                        batch.audio_embeddings, batch.audio_labels, 0.07)
        assert result.loss == pytest.approx(expected, abs=1e-12)
        assert np.allclose(result.grad_images, g1)
        assert np.allclose(result.grad_audio, g2)

    def test_equal_weights_sum_of_components(self):
        rng = np.random.default_rng(1)
        batch = make_batch(rng)
        result = total_loss(batch, LossConfig())
        parts = [
            supcon_cross(batch.image_embeddings, batch.image_labels,
                         batch.audio_embeddings, batch.audio_labels, 0.07)[0],
            supcon_cross(batch.audio_embeddings, batch.audio_labels,
                         batch.image_embeddings, batch.image_labels, 0.07)[0],
            supcon_intra(batch.image_embeddings, batch.image_labels, 0.07)[0],
            supcon_intra(batch.audio_embeddings, batch.audio_labels, 0.07)[0],
        ]
        assert abs(result.loss - 0.25 * sum(parts)) < 1e-6

    def test_modality_symmetry_under_equal_weights(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            batch = make_batch(rng)
            swapped = LabeledBatch(batch.audio_embeddings, batch.audio_labels,
                                   batch.image_embeddings, batch.image_labels)
            a = total_loss(batch, LossConfig())
            b = total_loss(swapped, LossConfig())
            assert abs(a.loss - b.loss) < 1e-6

    def test_swapping_sides_and_weights(self):
        rng = np.random.default_rng(3)
        batch = make_batch(rng)
        swapped = LabeledBatch(batch.audio_embeddings, batch.audio_labels,
                               batch.image_embeddings, batch.image_labels)
        a = total_loss(batch, LossConfig(lambdas=(0.4, 0.1, 0.3, 0.2)))
        b = total_loss(swapped, LossConfig(lambdas=(0.1, 0.4, 0.2, 0.3)))
        assert abs(a.loss - b.loss) < 1e-6

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        batch = make_batch(rng)
        perm = rng.permutation(batch.n)
        permuted = LabeledBatch(batch.image_embeddings[perm], batch.image_labels[perm],
                                batch.audio_embeddings[perm], batch.audio_labels[perm])
        a = total_loss(batch, LossConfig())
        b = total_loss(permuted, LossConfig())
        assert abs(a.loss - b.loss) < 1e-6

    def test_skipped_component_contributes_zero(self, caplog):
        # Image side shares no labels internally: both intra-image anchors
        # are skipped, but the cross-modal terms still contribute.
        z = random_unit_rows(np.random.default_rng(5), 2, 4)
        batch = LabeledBatch(z, np.array(["a", "b"], dtype=object),
                             random_unit_rows(np.random.default_rng(6), 2, 4),
                             np.array(["a", "a"], dtype=object))
        with caplog.at_level("WARNING", logger="emoclim.losses"):
            result = total_loss(batch, LossConfig())
        assert result.components["image_to_image"] is None
        assert result.n_contributing == 3
        assert any("skipped" in rec.message for rec in caplog.records)

    def test_perfect_alignment_beats_random(self):
        # Label-clustered orthogonal embeddings vs 100 random configurations.
        rng = np.random.default_rng(7)
        n, d = 12, 8
        y = np.array([i % 3 for i in range(n)])
        basis = np.eye(d)
        clustered = basis[y]
        aligned = LabeledBatch(clustered, y, clustered.copy(), y)
        aligned_loss = total_loss(aligned, LossConfig()).loss
        for _ in range(100):
            batch = LabeledBatch(random_unit_rows(rng, n, d), y,
                                 random_unit_rows(rng, n, d), y)
            assert aligned_loss < total_loss(batch, LossConfig()).loss

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            LossConfig(temperature=-1.0)
        with pytest.raises(ConfigurationError):
            LossConfig(lambdas=(0.0, 0.0, 0.0, 0.0))
        with pytest.raises(ConfigurationError):
            LossConfig(lambdas=(0.5, 0.5, -0.1, 0.1))

    def test_batch_validation(self):
        z = random_unit_rows(np.random.default_rng(0), 4, 4)
        with pytest.raises(ConfigurationError):
            LabeledBatch(z, np.zeros(4), z[:3], np.zeros(3))
        with pytest.raises(ConfigurationError):
            LabeledBatch(z * 2.0, np.zeros(4), z, np.zeros(4))
