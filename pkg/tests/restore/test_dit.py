import pytest
import torch

from dualprior.common.exceptions import CapacityError, ShapeError
from dualprior.prior.network import Priors
from dualprior.restore.dit import VelocityDiT, timestep_embedding
from tests.prior.factories import create_dummy_restorer_config


def test_timestep_embedding():
    embedding = timestep_embedding(torch.tensor([0.0, 0.5]), 8)

    assert embedding.shape == (2, 8)
    # cos(0) = 1 for the first half, sin(0) = 0 for the second
    assert torch.equal(embedding[0], torch.tensor([1.0] * 4 + [0.0] * 4))


def test_odd_embedding_size_is_padded():
    assert timestep_embedding(torch.tensor([0.3]), 7).shape == (1, 7)


def test_fresh_model_predicts_zero_velocity(generator):
    dit = VelocityDiT(create_dummy_restorer_config(), prior_dim=8)
    z = torch.randn(2, 4, 4, 4, 4, generator=generator)

    velocity = dit(z, torch.full((2,), 0.5), torch.zeros(1, 32))

    assert velocity.shape == z.shape
    assert not velocity.any()


def test_priors_do_not_change_a_fresh_backbone(generator):
    dit = VelocityDiT(create_dummy_restorer_config(), prior_dim=8)
    with torch.no_grad():
        dit.head.weight.normal_(generator=generator)
    z = torch.randn(1, 4, 4, 4, 4, generator=generator)
    priors = Priors(
        spatial=torch.randn(1, 4, 4, 4, 8, generator=generator),
        temporal=torch.randn(1, 4, 4, 4, 8, generator=generator),
    )
    t = torch.full((1,), 0.5)

    with torch.no_grad():
        fused = dit(z, t, torch.zeros(1, 32), priors)
        plain = dit(z, t, torch.zeros(1, 32))

    assert fused.abs().max() > 0
    assert torch.allclose(fused, plain, atol=1e-6)


def test_patch_size_two_keeps_latent_shape(generator):
    dit = VelocityDiT(create_dummy_restorer_config(patch_size=2), prior_dim=8)

    velocity = dit(torch.randn(1, 2, 4, 4, 4, generator=generator), torch.full((1,), 1.0), torch.zeros(1, 32))

    assert velocity.shape == (1, 2, 4, 4, 4)


def test_backbone_parameters_exclude_fusion():
    dit = VelocityDiT(create_dummy_restorer_config(), prior_dim=8)
    backbone = {id(p) for p in dit.backbone_parameters()}

    assert backbone.isdisjoint(id(p) for p in dit.fusion.parameters())
    assert len(backbone) + len(list(dit.fusion.parameters())) == len(list(dit.parameters()))


def test_token_grid_beyond_positional_tables():
    dit = VelocityDiT(create_dummy_restorer_config(), prior_dim=8)

    with pytest.raises(CapacityError):
        dit(torch.zeros(1, 5, 4, 4, 4), torch.full((1,), 0.5), torch.zeros(1, 32))


@pytest.mark.parametrize("shape, dimension", [((1, 2, 3, 4, 4), "H"), ((1, 2, 4, 5, 4), "W")])
def test_latent_not_divisible_by_patch_size(shape, dimension):
    dit = VelocityDiT(create_dummy_restorer_config(patch_size=2), prior_dim=8)

    with pytest.raises(ShapeError) as e:
        dit(torch.zeros(shape), torch.full((1,), 0.5), torch.zeros(1, 32))

    assert e.value.dimension == dimension
