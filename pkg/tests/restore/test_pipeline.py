import numpy as np
import pytest
import torch
from pydantic import ValidationError

from dualprior.common.enums import PriorMode
from dualprior.common.exceptions import ConfigurationError, OneStepContractError, ShapeError
from dualprior.data.models import VideoClip
from dualprior.fusion.models import FusionConfig
from dualprior.prior.network import StdcModel
from dualprior.restore.flow_matching import noise_inject, velocity_target
from dualprior.restore.pipeline import Restorer, clip_to_tensor, one_step_restore, tensor_to_clip
from tests.prior.factories import create_dummy_prior_config, create_dummy_restorer_config


@pytest.fixture
def restorer() -> Restorer:
    return Restorer(create_dummy_restorer_config(), create_dummy_prior_config()).eval()


@pytest.fixture
def stdc() -> StdcModel:
    return StdcModel(create_dummy_prior_config()).eval()


@pytest.fixture
def lq(generator) -> torch.Tensor:
    return torch.rand(1, 4, 16, 16, 3, generator=generator)


def test_restore_evaluates_the_velocity_network_once(restorer, stdc, lq):
    with torch.no_grad():
        output = restorer.restore(lq, stdc)

    assert restorer.velocity_evaluations == 1
    assert output.video.shape == lq.shape
    assert output.priors is not None
    assert output.priors.spatial.shape[1:4] == output.z_lq.shape[1:4]


def test_fresh_restorer_is_a_vae_round_trip(restorer, stdc, lq):
    with torch.no_grad():
        restored = restorer.restore(lq, stdc).video
        round_trip = restorer.vae_decode(restorer.vae_encode(lq))

    assert torch.allclose(restored, round_trip, atol=1e-6)


def test_oracle_velocity_recovers_the_clean_latent(restorer, generator):
    z_hq = torch.randn(1, 4, 4, 4, 4, generator=generator, dtype=torch.float64)
    eps = torch.randn(z_hq.shape, generator=generator, dtype=torch.float64)
    z_t = noise_inject(z_hq, eps, restorer.t_star)
    restorer.velocity_evaluations = 0

    restored = restorer.restore_latent(z_t, velocity_fn=lambda z, t: velocity_target(z_hq, eps))

    assert restorer.velocity_evaluations == 1
    assert torch.allclose(restored, z_hq, atol=1e-6)


def test_restore_enforces_the_one_step_contract(restorer, stdc, lq, monkeypatch):
    def two_steps(z_lq, priors=None):
        restorer.predict_velocity(z_lq, 0.5)
        return z_lq - restorer.predict_velocity(z_lq, 1.0)

    monkeypatch.setattr(restorer, "restore_latent", two_steps)

    with pytest.raises(OneStepContractError) as e:
        with torch.no_grad():
            restorer.restore(lq, stdc)

    assert e.value.context["evaluations"] == 2


def test_restorer_without_fusion_ignores_the_prior_extractor(stdc, lq):
    config = create_dummy_restorer_config(fusion=FusionConfig(prior_mode=PriorMode.NONE))
    restorer = Restorer(config, create_dummy_prior_config()).eval()

    with torch.no_grad():
        output = restorer.restore(lq, stdc)

    assert restorer.fusion is None
    assert output.priors is None
    assert restorer.parameter_groups()["fusion"] == []


def test_parameter_groups_partition_the_restorer(restorer):
    groups = restorer.parameter_groups()
    grouped = [id(p) for params in groups.values() for p in params]

    assert set(groups) == {"vae_encoder", "vae_decoder", "dit", "fusion", "c_text"}
    assert len(grouped) == len(set(grouped)) == len(list(restorer.parameters()))


def test_restorer_rejects_misaligned_grids():
    with pytest.raises(ConfigurationError):
        Restorer(create_dummy_restorer_config(), create_dummy_prior_config(spatial_stride=2))


def test_vae_rejects_indivisible_frames(restorer):
    with pytest.raises(ShapeError):
        restorer.vae_encode(torch.zeros(1, 4, 18, 16, 3))


def test_restorer_config_validation():
    with pytest.raises(ValidationError):
        create_dummy_restorer_config(t_star=0.0)

    with pytest.raises(ValidationError):
        create_dummy_restorer_config(heads=3)

    assert create_dummy_restorer_config(patch_size=2).token_grid(4, 16, 16) == (4, 2, 2)


def test_one_step_restore_clip(restorer, stdc, tiny_dataset):
    item = tiny_dataset.test[0]
    restorer.train()

    restored = one_step_restore(item.lq, restorer, stdc)

    assert isinstance(restored, VideoClip)
    assert restored.shape == item.lq.shape
    assert restored.name == f"{item.lq.name}_restored"
    # the caller's train/eval mode is preserved
    assert restorer.training


def test_one_step_restore_keeps_both_modes_on_failure(restorer, stdc, tiny_dataset, monkeypatch):
    restorer.train()
    stdc.train()

    def fail(*args, **kwargs):
        assert not restorer.training and not stdc.training
        raise ShapeError("bad latent", dimension="H")

    monkeypatch.setattr(restorer, "restore", fail)

    with pytest.raises(ShapeError):
        one_step_restore(tiny_dataset.test[0].lq, restorer, stdc)

    assert restorer.training
    assert stdc.training


def test_clip_tensor_conversion():
    clip = VideoClip(frames=np.full((2, 4, 4, 3), 0.25, dtype=np.float64), name="a")

    tensor = clip_to_tensor(clip)

    assert tensor.shape == (1, 2, 4, 4, 3)
    assert tensor.dtype == torch.float32
    assert np.array_equal(tensor_to_clip(tensor, name="a").frames, np.full((2, 4, 4, 3), 0.25, dtype=np.float32))
