import csv
import math
from types import SimpleNamespace

import numpy as np
import pytest
import torch
import torch.nn as nn

from ganad.errors import ConfigError, ShapeError
from ganad.scoring import (
    ScoreBreakdown,
    ScoreWeights,
    anogan_score,
    anomaly_score,
    combine,
    discrimination_loss,
    dump_scores_csv,
    latent_loss,
    residual_loss,
    score_dataset,
)


class FlattenEncoder(nn.Module):
    """E(x) = x flattened: identity on 2-vectors stored as (2, 1, 1) images."""

    def forward(self, x):
        return x.flatten(1)


class ReshapeGenerator(nn.Module):
    """G(z) = z reshaped back to a (2, 1, 1) image (identity map)."""

    latent_dim = 2

    def forward(self, z):
        return z.view(z.shape[0], 2, 1, 1)


class OffsetGenerator(nn.Module):
    """G(z) = fixed output, independent of z."""

    latent_dim = 2

    def __init__(self, out):
        super().__init__()
        self.out = torch.as_tensor(out, dtype=torch.float32).view(1, 2, 1, 1)

    def forward(self, z):
        return self.out.expand(z.shape[0], -1, -1, -1)


class IdentityCritic(nn.Module):
    """f_D(x) = x flattened; score = sum of components."""

    def forward_features(self, x):
        feats = x.flatten(1)
        return feats.sum(dim=1), feats


def identity_bundle():
    return SimpleNamespace(encoder=FlattenEncoder(), generator=ReshapeGenerator(), critic=IdentityCritic())


def stub_bundle(recon):
    return SimpleNamespace(encoder=FlattenEncoder(), generator=OffsetGenerator(recon), critic=IdentityCritic())


class TestWeights:
    def test_validation(self):
        ScoreWeights(lam=0.0, beta=0.0)
        ScoreWeights(lam=1.0, beta=10.0)
        with pytest.raises(ConfigError):
            ScoreWeights(lam=1.2)
        with pytest.raises(ConfigError):
            ScoreWeights(beta=-0.1)

    def test_dataset_defaults(self):
        assert ScoreWeights.for_dataset("mnist") == ScoreWeights(lam=0.8, beta=0.5)
        for tag in ("cifar10", "svhn", "all_medical"):
            assert ScoreWeights.for_dataset(tag) == ScoreWeights(lam=0.8, beta=1.0)


class TestComponentsOnStubs:
    def test_identity_reconstruction_gives_zero(self):
        b = identity_bundle()
        x = torch.tensor([[1.0], [0.5]]).view(2, 1, 1)
        assert discrimination_loss(x, b) == 0.0
        assert residual_loss(x, b) == 0.0
        assert latent_loss(x, b) == 0.0

    def test_discrimination_hand_sum(self):
        # f_D(x) = x on 2-vectors: x = (1, 0), reconstruction = (0, 1)
        b = stub_bundle([0.0, 1.0])
        x = torch.tensor([1.0, 0.0]).view(2, 1, 1)
        assert discrimination_loss(x, b) == pytest.approx(2.0)

    def test_latent_hand_sum(self):
        # E = identity: x = (3, 1), reconstruction = (1, 1)
        b = stub_bundle([1.0, 1.0])
        x = torch.tensor([3.0, 1.0]).view(2, 1, 1)
        assert latent_loss(x, b) == pytest.approx(2.0)

    def test_residual_counts_unit_deviations(self):
        b = stub_bundle([0.0, 0.0])
        x = torch.ones(2, 1, 1)
        assert residual_loss(x, b) == pytest.approx(2.0)


class TestCombine:
    def test_hand_arithmetic(self):
        assert combine(2.0, 10.0, 4.0, ScoreWeights(lam=0.8, beta=1.0)) == pytest.approx(7.6)

    def test_affine_identity(self, rng):
        for _ in range(50):
            d, r, l = rng.rand(3) * 10
            lam, beta = rng.rand(), rng.rand() * 3
            total = combine(d, r, l, ScoreWeights(lam=lam, beta=beta))
            assert total == pytest.approx(lam * d + (1 - lam) * r + beta * l, abs=1e-6)

    def test_reductions(self):
        b = stub_bundle([0.25, -0.5])
        x = torch.tensor([1.0, 0.0]).view(2, 1, 1)
        bd = anomaly_score(x, b, ScoreWeights(lam=1.0, beta=0.0))
        assert bd.total == pytest.approx(bd.discrimination)
        bd = anomaly_score(x, b, ScoreWeights(lam=0.0, beta=0.0))
        assert bd.total == pytest.approx(bd.residual)

    def test_perfect_reconstruction_total_zero(self):
        b = identity_bundle()
        x = torch.tensor([0.3, -0.7]).view(2, 1, 1)
        for w in (ScoreWeights(0.8, 1.0), ScoreWeights(0.1, 3.0)):
            assert anomaly_score(x, b, w).total == 0.0


class TestOnTrainedBundle:
    def loop_oracle(self, x, bundle, w):
        """Scalar-loop recomputation of all three components."""
        x_b = torch.as_tensor(x, dtype=torch.float32).unsqueeze(0)
        with torch.no_grad():
            z = bundle.encoder(x_b)
            recon = bundle.generator(z)
            z2 = bundle.encoder(recon)
            _, fx = bundle.critic.forward_features(x_b)
            _, fr = bundle.critic.forward_features(recon)
        disc = sum(abs(a - b) for a, b in zip(fx.flatten().tolist(), fr.flatten().tolist()))
        resid = sum(abs(a - b) for a, b in zip(x_b.flatten().tolist(), recon.flatten().tolist()))
        lat = sum(abs(a - b) for a, b in zip(z.flatten().tolist(), z2.flatten().tolist()))
        return disc, resid, lat

    def test_components_match_loop_oracle(self, trained, synthetic_splits):
        bundle = trained.bundle
        w = ScoreWeights.for_dataset("synthetic")
        for item in synthetic_splits.test[:5]:
            bd = anomaly_score(item.pixels, bundle, w)
            disc, resid, lat = self.loop_oracle(item.pixels, bundle, w)
            assert bd.discrimination == pytest.approx(disc, abs=1e-5 * max(1, disc))
            assert bd.residual == pytest.approx(resid, abs=1e-5 * max(1, resid))
            assert bd.latent == pytest.approx(lat, abs=1e-5 * max(1, lat))
            assert bd.total >= 0.0

    def test_non_negative_components(self, trained, synthetic_splits):
        w = ScoreWeights(0.5, 0.5)
        for item in synthetic_splits.test[:10]:
            bd = anomaly_score(item.pixels, trained.bundle, w)
            assert bd.discrimination >= 0 and bd.residual >= 0 and bd.latent >= 0 and bd.total >= 0


class TestScoreDataset:
    def test_empty(self, trained):
        assert score_dataset([], trained.bundle, ScoreWeights()) == []

    def test_batch_matches_single(self, trained, synthetic_splits):
        w = ScoreWeights.for_dataset("synthetic")
        items = synthetic_splits.test[:8]
        batched = score_dataset(items, trained.bundle, w, batch_size=8)
        for item, bd in batched:
            single = anomaly_score(item.pixels, trained.bundle, w)
            assert bd.total == pytest.approx(single.total, abs=1e-5 * max(1, single.total))

    def test_labels_passed_through_in_order(self, trained, synthetic_splits):
        items = synthetic_splits.test[:6]
        out = score_dataset(items, trained.bundle, ScoreWeights())
        assert [it.item_id for it, _ in out] == [it.item_id for it in items]
        assert [it.anomaly_label for it, _ in out] == [it.anomaly_label for it in items]

    def test_csv_dump(self, trained, synthetic_splits, tmp_path):
        items = synthetic_splits.test[:4]
        scored = score_dataset(items, trained.bundle, ScoreWeights())
        path = tmp_path / "scores.csv"
        dump_scores_csv(path, scored)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["item_id", "label", "discrimination", "residual", "latent", "total"]
        assert len(rows) == 5


class TestAnogan:
    def test_identity_generator_converges_to_zero(self):
        # for G(z) = z and x = 0 the objective is a weighted |z| sum with optimum 0
        gen = ReshapeGenerator()
        critic = IdentityCritic()
        x = torch.zeros(2, 1, 1)
        score = anogan_score(x, gen, critic, iterations=800, step_size=1e-2, w=ScoreWeights(0.8, 0), seed=3)
        assert score < 0.05

    def test_best_so_far_not_worse_than_start(self, trained, synthetic_splits):
        item = synthetic_splits.test[0]
        one = anogan_score(item.pixels, trained.bundle.generator, trained.bundle.critic, iterations=1, seed=5)
        many = anogan_score(item.pixels, trained.bundle.generator, trained.bundle.critic, iterations=100, seed=5)
        assert many <= one

    def test_deterministic_given_seed(self, trained, synthetic_splits):
        item = synthetic_splits.test[1]
        a = anogan_score(item.pixels, trained.bundle.generator, trained.bundle.critic, iterations=20, seed=7)
        b = anogan_score(item.pixels, trained.bundle.generator, trained.bundle.critic, iterations=20, seed=7)
        assert a == b

    def test_rejects_bad_iterations(self, trained):
        with pytest.raises(ConfigError):
            anogan_score(torch.zeros(1, 28, 28), trained.bundle.generator, trained.bundle.critic, iterations=0)
