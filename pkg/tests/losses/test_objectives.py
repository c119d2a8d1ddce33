import math

import pytest
import torch

from dualprior.common.enums import CEReduction, Stage
from dualprior.common.exceptions import CodeIndexError, ShapeError
from dualprior.losses.models import LossWeights
from dualprior.losses.networks import Discriminator, FeatureExtractor
from dualprior.losses.objectives import (
    code_cross_entropy,
    code_feature_loss,
    discriminator_loss,
    discriminator_step,
    feature_loss,
    stage0_loss,
    stage1_loss,
    stage1p_loss,
    stage2_loss,
    temporal_loss,
)


class ConstantDiscriminator(Discriminator):
    """Emits a fixed logit for every frame"""

    def __init__(self, logit: float = 0.0):
        super().__init__(channels=4)
        self.logit = logit

    def forward(self, video: torch.Tensor) -> torch.Tensor:
        return torch.full(video.shape[:2], self.logit) + 0.0 * self.net[0].weight.sum()


def test_feature_loss_oracle():
    z_h = torch.zeros(1, 2)
    z_q = torch.ones(1, 2)

    assert float(feature_loss(z_h, z_q, beta=0.25)) == pytest.approx(1.25)


def test_feature_loss_routes_gradients_through_stop_gradients():
    z_h = torch.zeros(1, 2, requires_grad=True)
    z_q = torch.ones(1, 2, requires_grad=True)

    feature_loss(z_h, z_q, beta=0.25).backward()

    # d/dz_q of mean((z_q - z_h)^2) and beta * d/dz_h of mean((z_h - z_q)^2)
    assert torch.allclose(z_q.grad, torch.ones(1, 2))
    assert torch.allclose(z_h.grad, torch.full((1, 2), -0.25))


def test_uniform_discriminator_loss_is_two_log_two():
    video = torch.rand(1, 2, 8, 8, 3)

    loss = discriminator_loss(ConstantDiscriminator(0.0), video, video)

    assert float(loss) == pytest.approx(2 * math.log(2))


def test_discriminator_step_does_not_touch_the_generator(generator):
    disc = Discriminator(channels=4)
    fake = torch.rand(1, 2, 8, 8, 3, generator=generator, requires_grad=True)
    real = torch.rand(1, 2, 8, 8, 3, generator=generator)
    before = [p.detach().clone() for p in disc.parameters()]

    loss = discriminator_step(real, fake, disc, torch.optim.SGD(disc.parameters(), lr=0.1))

    assert math.isfinite(loss)
    assert fake.grad is None
    assert any(not torch.equal(a, b) for a, b in zip(before, disc.parameters()))


def test_discriminator_step_clips_the_gradient_norm(generator):
    disc = Discriminator(channels=4)
    fake = torch.rand(1, 2, 8, 8, 3, generator=generator)
    real = torch.rand(1, 2, 8, 8, 3, generator=generator)
    before = [p.detach().clone() for p in disc.parameters()]

    # plain SGD at lr 1 moves the parameters by exactly the clipped gradient
    discriminator_step(real, fake, disc, torch.optim.SGD(disc.parameters(), lr=1.0), grad_clip=1e-3)

    moved = torch.stack([torch.linalg.vector_norm(p.detach() - b) for p, b in zip(disc.parameters(), before)])
    assert 0 < float(torch.linalg.vector_norm(moved)) <= 1e-3 + 1e-6


def test_cross_entropy_of_uniform_logits():
    logits = torch.zeros(2, 12, 64)
    targets = torch.randint(0, 64, (2, 12))

    assert float(code_cross_entropy(logits, targets, CEReduction.MEAN)) == pytest.approx(math.log(64))
    assert float(code_cross_entropy(logits, targets, CEReduction.SUM)) == pytest.approx(12 * math.log(64))


def test_cross_entropy_accepts_grid_targets():
    logits = torch.zeros(1, 8, 4)

    loss = code_cross_entropy(logits, torch.zeros(1, 2, 2, 2, dtype=torch.long), CEReduction.MEAN)

    assert float(loss) == pytest.approx(math.log(4))


def test_cross_entropy_rejects_bad_targets():
    with pytest.raises(CodeIndexError):
        code_cross_entropy(torch.zeros(1, 4, 8), torch.tensor([[0, 1, 2, 8]]))

    with pytest.raises(ShapeError):
        code_cross_entropy(torch.zeros(1, 4, 8), torch.tensor([[0, 1, 2]]))


def test_code_feature_loss_stops_gradients_into_targets():
    z_l = torch.zeros(1, 4, requires_grad=True)
    z_q = torch.ones(1, 4, requires_grad=True)

    loss = code_feature_loss(z_l, z_q)
    loss.backward()

    assert float(loss) == pytest.approx(1.0)
    assert z_q.grad is None
    assert torch.allclose(z_l.grad, torch.full((1, 4), -0.5))


def test_temporal_loss_of_a_static_video_is_zero(generator):
    video = torch.rand(1, 1, 8, 8, 3, generator=generator).repeat(2, 4, 1, 1, 1)
    zeros = torch.zeros(2, 3, 8, 8, 2)

    assert float(temporal_loss(video, zeros, zeros)) == 0.0


def test_temporal_loss_counts_both_directions_of_interior_frames():
    # frame i is filled with the value i, so every warped comparison is off by exactly 1
    video = torch.arange(4, dtype=torch.float32).reshape(1, 4, 1, 1, 1).expand(1, 4, 4, 4, 3).contiguous()
    zeros = torch.zeros(1, 3, 4, 4, 2)

    # interior frames 1 and 2, each compared forward and backward
    assert float(temporal_loss(video, zeros, zeros)) == pytest.approx(4.0)


def test_temporal_loss_needs_three_frames():
    with pytest.raises(ShapeError):
        temporal_loss(torch.zeros(1, 2, 4, 4, 3), torch.zeros(1, 1, 4, 4, 2), torch.zeros(1, 1, 4, 4, 2))

    with pytest.raises(ShapeError):
        temporal_loss(torch.zeros(1, 3, 4, 4, 3), torch.zeros(1, 1, 4, 4, 2), torch.zeros(1, 2, 4, 4, 2))


def test_stage0_loss():
    output = stage0_loss(torch.zeros(1, 2, 4, 4, 3), torch.full((1, 2, 4, 4, 3), 0.5))

    assert float(output.terms["rec_pixel"]) == pytest.approx(0.25)
    assert float(output.terms["l1"]) == pytest.approx(0.5)
    assert output.report(Stage.STAGE0, LossWeights()).total == pytest.approx(0.75)


def test_stage1_loss_combines_its_terms(generator):
    weights = LossWeights()
    x_hq = torch.rand(1, 2, 8, 8, 3, generator=generator)
    z_h = torch.randn(1, 2, 2, 2, 8, generator=generator)
    z_q = torch.randn(1, 2, 2, 2, 8, generator=generator)

    output = stage1_loss(x_hq, x_hq, z_h, z_q, ConstantDiscriminator(0.0), FeatureExtractor(channels=(4, 4, 4)), weights)

    assert float(output.terms["l1"]) == 0.0
    assert float(output.terms["per"]) == 0.0
    assert float(output.terms["adv_g"]) == pytest.approx(math.log(2))
    expected = float(output.terms["feat"]) + weights.lambda_adv * math.log(2)
    assert float(output.total) == pytest.approx(expected)
    report = output.report(Stage.STAGE1, weights)
    assert report.adv_g == pytest.approx(math.log(2))


def test_stage1p_loss(generator):
    weights = LossWeights(lambda_ce=0.5, ce_reduction=CEReduction.MEAN)
    logits = torch.zeros(1, 8, 16)
    targets = torch.zeros(1, 8, dtype=torch.long)
    z = torch.randn(1, 2, 2, 2, 4, generator=generator)

    output = stage1p_loss(logits, logits, targets, targets, z, z, weights)

    assert float(output.terms["cf"]) == 0.0
    assert float(output.total) == pytest.approx(0.5 * 2 * math.log(16))


def test_stage2_loss_of_a_perfect_restoration(generator):
    z = torch.randn(1, 3, 2, 2, 4, generator=generator)
    x = torch.rand(1, 1, 8, 8, 3, generator=generator).repeat(1, 3, 1, 1, 1)
    zeros = torch.zeros(1, 2, 8, 8, 2)

    output = stage2_loss(z, z, x, x, zeros, zeros, FeatureExtractor(channels=(4, 4, 4)), LossWeights())

    assert float(output.total) == 0.0
    assert set(output.terms) == {"rec_latent", "rec_pixel", "per", "temp"}


def test_feature_extractor_is_frozen():
    extractor = FeatureExtractor(channels=(4, 4, 4))
    extractor.train()

    assert not extractor.training
    assert not any(p.requires_grad for p in extractor.parameters())
    assert [m.shape[1] for m in extractor.features(torch.rand(1, 2, 8, 8, 3))] == [4, 4, 4]
