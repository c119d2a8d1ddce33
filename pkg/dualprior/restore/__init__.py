from .dit import DiTBlock, TimestepEmbedder, VelocityDiT, timestep_embedding
from .flow_matching import noise_inject, one_step_denoise, velocity_target
from .models import RestorerConfig
from .pipeline import (
    RestoreOutput,
    Restorer,
    VelocityFn,
    clip_to_tensor,
    one_step_restore,
    tensor_to_clip,
)
from .vae import TinyVAE
