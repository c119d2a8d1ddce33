from typing import Tuple

from pydantic import Field, validator

from ..common.constants import DEFAULT_T_STAR
from ..common.exceptions import ConfigurationError, ShapeError
from ..common.models import ValidateBaseModel
from ..common.types import GridShape
from ..fusion.models import FusionConfig
from ..prior.models import PriorConfig


class RestorerConfig(ValidateBaseModel):
    """
    Sizes of the VAE stand-in and the velocity transformer.

    Attributes:
        latent_dim (int): VAE latent channels d_v.
        vae_hidden (int): Width of the VAE convolutions.
        vae_stride (int): VAE spatial downsampling, a power of two.
        patch_size (int): DiT patch edge on the latent grid.
        width (int): DiT hidden width C_dit.
        depth (int): Number of DiT blocks.
        heads (int): Self- and cross-attention heads per block.
        timestep_frequencies (int): Size of the sinusoidal timestep features.
        max_grid (Tuple[int, int, int]): Largest token grid covered by the positional tables.
        t_star (float): The fixed timestep t* in (0, 1].
        fusion (FusionConfig): Prior fusion settings.
        seed (int): Parameter initialization seed.
    """

    latent_dim: int = 8
    vae_hidden: int = 64
    vae_stride: int = 4
    patch_size: int = 1
    width: int = 128
    depth: int = 4
    heads: int = 4
    timestep_frequencies: int = 256
    max_grid: Tuple[int, int, int] = (8, 16, 16)
    t_star: float = DEFAULT_T_STAR
    fusion: FusionConfig = Field(default_factory=FusionConfig)
    seed: int = 0

    @validator("t_star")
    def t_star_in_unit_interval(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError(f"t_star must lie within (0, 1], got {v}")
        return v

    @validator("vae_stride")
    def stride_is_power_of_two(cls, v: int) -> int:
        if v < 1 or v & (v - 1):
            raise ValueError("vae_stride must be a power of two")
        return v

    @validator("heads")
    def heads_divide_width(cls, v: int, values: dict) -> int:
        if "width" in values and values["width"] % v:
            raise ValueError("heads must divide width")
        return v

    @property
    def token_stride(self) -> int:
        return self.vae_stride * self.patch_size

    def token_grid(self, frames: int, height: int, width: int) -> GridShape:
        """DiT token grid (t, h, w) of a T x H x W video

        Raises:
            ShapeError: If H or W is not divisible by the token stride.
        """
        for name, size in (("H", height), ("W", width)):
            if size % self.token_stride:
                raise ShapeError(
                    f"{name}={size} is not divisible by the token stride {self.token_stride}",
                    dimension=name,
                )
        return frames, height // self.token_stride, width // self.token_stride

    def check_alignment(self, prior: PriorConfig) -> None:
        """Fails fast unless the prior grid equals the token grid for every video shape.

        Raises:
            ConfigurationError: If the strides disagree.
        """
        if prior.temporal_stride != 1 or prior.spatial_stride != self.token_stride:
            raise ConfigurationError(
                f"prior grid strides (t={prior.temporal_stride}, s={prior.spatial_stride}) do not match the "
                f"token grid strides (t=1, s={self.token_stride})",
                {"prior_stride": prior.spatial_stride, "token_stride": self.token_stride},
            )
