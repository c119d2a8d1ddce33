import math

import pytest
import torch

from dualprior.common.enums import FusionVariant, PriorMode
from dualprior.common.exceptions import ShapeError
from dualprior.fusion.attention import CrossRefine
from dualprior.fusion.models import FusionConfig
from dualprior.fusion.modulation import ModulationNet, ModulationParams, apply_modulation
from dualprior.fusion.module import PriorFusion, fuse


def create_dummy_priors(generator: torch.Generator, batch: int = 2, dim: int = 4):
    f_s = torch.randn(batch, 2, 2, 2, dim, generator=generator)
    f_t = torch.randn(batch, 2, 2, 2, dim, generator=generator)
    return f_s, f_t


def _perturb(module: torch.nn.Module, generator: torch.Generator) -> None:
    with torch.no_grad():
        for param in module.parameters():
            param.add_(torch.randn(param.shape, generator=generator) * 0.1)


@pytest.mark.parametrize("variant", list(FusionVariant))
@pytest.mark.parametrize("mode", [PriorMode.SPATIAL, PriorMode.TEMPORAL, PriorMode.BOTH])
def test_fresh_fusion_is_the_identity(generator, mode, variant):
    fusion = PriorFusion(4, 8, 2, FusionConfig(prior_mode=mode, variant=variant, modulation_hidden=8))
    x = torch.randn(2, 8, 8, generator=generator)
    f_s, f_t = create_dummy_priors(generator)

    assert fusion.nonzero_output_layers() == []
    for index in range(2):
        assert torch.allclose(fuse(x, f_s, f_t, fusion, index), x, atol=1e-6)


def test_trained_fusion_changes_tokens(generator):
    fusion = PriorFusion(4, 8, 1, FusionConfig(modulation_hidden=8))
    _perturb(fusion, generator)
    x = torch.randn(2, 8, 8, generator=generator)
    f_s, f_t = create_dummy_priors(generator)

    assert fusion.nonzero_output_layers()
    assert not torch.allclose(fuse(x, f_s, f_t, fusion), x)


def test_asymmetric_modulation_is_shared_across_blocks():
    fusion = PriorFusion(4, 8, 3, FusionConfig(variant=FusionVariant.ASYMMETRIC, modulation_hidden=8))

    assert fusion.modulation is not None
    assert all(block.modulation is None and block.cross is not None for block in fusion.blocks)


def test_independent_modulation_is_per_block():
    config = FusionConfig(variant=FusionVariant.INDEPENDENT_MODULATION, modulation_hidden=8)
    fusion = PriorFusion(4, 8, 3, config)

    assert fusion.modulation is None
    assert all(block.modulation is not None for block in fusion.blocks)


def test_symmetric_variant_has_no_modulation():
    fusion = PriorFusion(4, 8, 2, FusionConfig(variant=FusionVariant.SYMMETRIC, modulation_hidden=8))

    assert fusion.modulation is None
    assert all(block.w_joint is not None for block in fusion.blocks)


def test_temporal_only_mode_injects_no_residual():
    fusion = PriorFusion(4, 8, 2, FusionConfig(prior_mode=PriorMode.TEMPORAL, modulation_hidden=8))

    assert fusion.modulation is not None
    assert all(block.proj is None for block in fusion.blocks)


def test_temporal_prior_drives_the_modulation(generator):
    fusion = PriorFusion(4, 8, 1, FusionConfig(prior_mode=PriorMode.TEMPORAL, modulation_hidden=8))
    _perturb(fusion, generator)
    x = torch.randn(1, 8, 8, generator=generator)
    f_s, f_t = create_dummy_priors(generator, batch=1)

    # the spatial prior has no path into a temporal-only fusion
    assert torch.equal(fuse(x, f_s, f_t, fusion), fuse(x, torch.zeros_like(f_s), f_t, fusion))
    assert not torch.equal(fuse(x, f_s, f_t, fusion), fuse(x, f_s, f_t + 1.0, fusion))


def test_modulation_pools_over_the_grid(generator):
    f_t = torch.randn(2, 2, 3, 3, 4, generator=generator)

    pooled = ModulationNet.pool(f_t)

    assert torch.allclose(pooled, f_t.reshape(2, -1, 4).mean(dim=1))


def test_apply_modulation():
    x = torch.ones(2, 3, 4)
    params = ModulationParams(gamma=torch.full((2, 4), 0.5), beta=torch.full((2, 4), -1.0))

    assert torch.allclose(apply_modulation(x, params), torch.full((2, 3, 4), 0.5))

    with pytest.raises(ShapeError):
        apply_modulation(torch.ones(2, 3, 5), params)


def test_cross_attention_output_shape(generator):
    f_s, f_t = create_dummy_priors(generator)

    assert CrossRefine(4, 8, heads=2)(f_t, f_s).shape == (2, 8, 8)

    with pytest.raises(ValueError):
        CrossRefine(4, 8, heads=3)


def test_cross_attention_queries_come_from_the_temporal_prior(generator):
    refine = CrossRefine(4, 8)
    f_s = torch.randn(1, 1, 1, 1, 4, generator=generator).repeat(1, 2, 2, 2, 1)
    f_t = torch.randn(1, 2, 2, 2, 4, generator=generator)

    # with identical keys the attention is uniform, so every query gets the same value
    out = refine(f_t, f_s)

    assert torch.allclose(out, out[:, :1].expand_as(out), atol=1e-6)


def test_cross_attention_three_token_oracle():
    refine = CrossRefine(2, 2)
    with torch.no_grad():
        for projection in (refine.w_q, refine.w_k, refine.w_v):
            projection.weight.copy_(torch.eye(2))

    # scores are q.k / sqrt(2), so these queries weight the keys 2:1:1, 1:1:1 and 1:3:1
    root2 = math.sqrt(2.0)
    f_t = torch.tensor([[root2 * math.log(2.0), 0.0], [0.0, 0.0], [0.0, root2 * math.log(3.0)]])
    f_s = torch.tensor([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])

    out = refine(f_t.reshape(1, 1, 1, 3, 2), f_s.reshape(1, 1, 1, 3, 2))

    expected = torch.tensor([[0.5, 0.25], [1 / 3, 1 / 3], [0.2, 0.6]])
    assert torch.allclose(out[0], expected, atol=1e-6)


def test_prior_grid_must_match_tokens(generator):
    fusion = PriorFusion(4, 8, 1, FusionConfig(modulation_hidden=8))
    f_s, f_t = create_dummy_priors(generator)

    with pytest.raises(ShapeError) as e:
        fuse(torch.zeros(2, 9, 8), f_s, f_t, fusion)

    assert e.value.dimension == "tokens"

    with pytest.raises(ShapeError):
        fusion.prepare(f_s, f_t[:, :1])
