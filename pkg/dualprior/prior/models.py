from typing import Tuple

from pydantic import root_validator, validator

from ..common.exceptions import ShapeError
from ..common.models import ValidateBaseModel
from ..common.types import GridShape


class PriorConfig(ValidateBaseModel):
    """
    Sizes of the dual-codebook prior extractor.

    Attributes:
        codebook_size (int): Entries K per codebook.
        code_dim (int): Code dimension d, also the encoder output width.
        spatial_stride (int): Encoder downsampling factor in H and W, a power of two.
        temporal_stride (int): Frames averaged into one latent step.
        hidden_channels (int): Width of the encoder and decoder convolutions.
        temporal_heads (int): Heads of the temporal self-attention, must divide code_dim.
        transformer_width (int): Width of the code prediction transformers.
        transformer_layers (int): Encoder layers per code prediction transformer.
        transformer_heads (int): Attention heads per code prediction transformer.
        max_grid (Tuple[int, int, int]): Largest (t, h, w) grid the learned positional tables cover.
        max_tokens (int): Largest t*h*w token count accepted by the code prediction transformers.
        seed (int): Parameter initialization seed.
    """

    codebook_size: int = 64
    code_dim: int = 32
    spatial_stride: int = 4
    temporal_stride: int = 1
    hidden_channels: int = 64
    temporal_heads: int = 4
    transformer_width: int = 128
    transformer_layers: int = 4
    transformer_heads: int = 4
    max_grid: Tuple[int, int, int] = (8, 16, 16)
    max_tokens: int = 2048
    seed: int = 0

    @validator("codebook_size")
    def codebook_has_alternatives(cls, v: int) -> int:
        if v < 2:
            raise ValueError("codebooks need at least 2 entries")
        return v

    @validator("spatial_stride")
    def stride_is_power_of_two(cls, v: int) -> int:
        if v < 1 or v & (v - 1):
            raise ValueError("spatial_stride must be a power of two")
        return v

    @validator("temporal_stride", "code_dim", "hidden_channels", "transformer_layers", "max_tokens")
    def positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("sizes must be positive")
        return v

    @root_validator(skip_on_failure=True)
    def heads_divide_widths(cls, values: dict) -> dict:
        if values["code_dim"] % values["temporal_heads"]:
            raise ValueError("temporal_heads must divide code_dim")
        if values["transformer_width"] % values["transformer_heads"]:
            raise ValueError("transformer_heads must divide transformer_width")
        return values

    def grid_shape(self, frames: int, height: int, width: int) -> GridShape:
        """Latent grid (t, h, w) of a T x H x W video.

        Raises:
            ShapeError: If a dimension is not divisible by its stride.
        """
        for name, size, stride in (
            ("T", frames, self.temporal_stride),
            ("H", height, self.spatial_stride),
            ("W", width, self.spatial_stride),
        ):
            if size % stride:
                raise ShapeError(
                    f"{name}={size} is not divisible by the encoder stride {stride}",
                    dimension=name,
                    size=size,
                    stride=stride,
                )

        return (
            frames // self.temporal_stride,
            height // self.spatial_stride,
            width // self.spatial_stride,
        )
