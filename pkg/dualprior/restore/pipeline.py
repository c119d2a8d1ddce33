import logging
from typing import Callable, Dict, List, NamedTuple, Optional

import numpy as np
import torch
from torch import nn

from ..common.exceptions import OneStepContractError
from ..common.random import seeded_init
from ..common.types import LatentGrid, VideoTensor
from ..data.models import VideoClip
from ..prior.models import PriorConfig
from ..prior.network import Priors, StdcModel
from .dit import VelocityDiT
from .flow_matching import one_step_denoise
from .models import RestorerConfig
from .vae import TinyVAE

log = logging.getLogger(__name__)

VelocityFn = Callable[[LatentGrid, torch.Tensor], LatentGrid]


class RestoreOutput(NamedTuple):
    video: VideoTensor
    z_lq: LatentGrid
    z_restored: LatentGrid
    priors: Optional[Priors]


class Restorer(nn.Module):
    """
    One-step restorer: VAE stand-in, velocity DiT with prior fusion, and the learned null text embedding.

    Args:
        config (RestorerConfig): Sizes, t* and fusion settings.
        prior_config (PriorConfig): The prior extractor's config, used to check grid alignment.

    Raises:
        ConfigurationError: If the prior grid cannot equal the DiT token grid.
    """

    def __init__(self, config: RestorerConfig, prior_config: PriorConfig):
        super().__init__()
        config.check_alignment(prior_config)
        self.config = config
        self.velocity_evaluations = 0

        with seeded_init(config.seed, "restorer"):
            self.vae = TinyVAE(config.latent_dim, config.vae_hidden, config.vae_stride)
            self.dit = VelocityDiT(config, prior_config.code_dim)
            self.c_text = nn.Parameter(torch.randn(1, config.width) * 0.02)

    @property
    def t_star(self) -> float:
        return self.config.t_star

    @property
    def fusion(self):
        return self.dit.fusion

    def parameter_groups(self) -> Dict[str, List[nn.Parameter]]:
        """Named parameter groups used by the stage freeze rules"""
        return {
            **self.vae.parameter_groups(),
            "dit": self.dit.backbone_parameters(),
            "fusion": list(self.fusion.parameters()) if self.fusion is not None else [],
            "c_text": [self.c_text],
        }

    def vae_encode(self, x: VideoTensor) -> LatentGrid:
        return self.vae.encode(x)

    def vae_decode(self, z: LatentGrid) -> VideoTensor:
        return self.vae.decode(z)

    def predict_velocity(
        self,
        z: LatentGrid,
        t: float,
        f_s: Optional[LatentGrid] = None,
        f_t: Optional[LatentGrid] = None,
        c_text: Optional[torch.Tensor] = None,
    ) -> LatentGrid:
        """v_theta(z, t, c_text, f_s, f_t). Every call counts as one velocity evaluation."""
        self.velocity_evaluations += 1

        timestep = torch.full((z.shape[0],), float(t), dtype=z.dtype, device=z.device)
        priors = Priors(spatial=f_s, temporal=f_t) if f_s is not None and f_t is not None else None

        return self.dit(z, timestep, self.c_text if c_text is None else c_text, priors)

    def restore_latent(
        self,
        z_lq: LatentGrid,
        priors: Optional[Priors] = None,
        velocity_fn: Optional[VelocityFn] = None,
    ) -> LatentGrid:
        """z_lq - t* v(z_lq, t*), treating z_lq as the noisy latent at t*.

        Args:
            z_lq (LatentGrid): The LQ latent.
            priors (Optional[Priors]): Priors for the fusion modules.
            velocity_fn (Optional[VelocityFn]): Replaces the network, ie with an oracle velocity. It is counted
              like the network.
        """
        if velocity_fn is not None:
            self.velocity_evaluations += 1
            velocity = velocity_fn(z_lq, torch.tensor(self.t_star))
        elif priors is not None:
            velocity = self.predict_velocity(z_lq, self.t_star, priors.spatial, priors.temporal)
        else:
            velocity = self.predict_velocity(z_lq, self.t_star)

        return one_step_denoise(z_lq, velocity, self.t_star)

    def restore(self, x_lq: VideoTensor, stdc: Optional[StdcModel]) -> RestoreOutput:
        """vae_encode -> extract_priors -> one velocity evaluation at t* -> one-step denoise -> vae_decode.

        Raises:
            OneStepContractError: If the velocity network ran other than exactly once.
        """
        self.velocity_evaluations = 0

        z_lq = self.vae_encode(x_lq)
        priors = stdc.extract_priors(x_lq) if stdc is not None and self.fusion is not None else None
        z_restored = self.restore_latent(z_lq, priors)

        if self.velocity_evaluations != 1:
            raise OneStepContractError(
                f"restoration evaluated the velocity network {self.velocity_evaluations} times",
                {"evaluations": self.velocity_evaluations},
            )

        return RestoreOutput(
            video=self.vae_decode(z_restored), z_lq=z_lq, z_restored=z_restored, priors=priors
        )


def clip_to_tensor(clip: VideoClip) -> VideoTensor:
    """(T, H, W, 3) clip -> (1, T, H, W, 3) float32 tensor"""
    return torch.from_numpy(np.ascontiguousarray(clip.frames, dtype=np.float32)).unsqueeze(0)


def tensor_to_clip(video: VideoTensor, name: Optional[str] = None) -> VideoClip:
    frames = video.detach().cpu().numpy()
    if frames.ndim == 5:
        frames = frames[0]
    return VideoClip(frames=np.clip(frames, 0.0, 1.0), name=name)


def one_step_restore(x_lq: VideoClip, model: Restorer, stdc_model: Optional[StdcModel]) -> VideoClip:
    """Restores a clip with exactly one velocity evaluation.

    Args:
        x_lq (VideoClip): The degraded clip.
        model (Restorer): The trained restorer.
        stdc_model (Optional[StdcModel]): The prior extractor. May be None when fusion is disabled.

    Returns:
        VideoClip: The restored clip, values in [0, 1]
    """
    modes = [(m, m.training) for m in (model, stdc_model) if m is not None]
    for m, _ in modes:
        m.eval()

    try:
        with torch.no_grad():
            output = model.restore(clip_to_tensor(x_lq), stdc_model)
    finally:
        for m, training in modes:
            m.train(training)

    name = f"{x_lq.name}_restored" if x_lq.name else None

    return tensor_to_clip(output.video, name=name)
