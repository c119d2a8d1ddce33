from typing import Dict, List

from einops import rearrange
from torch import nn

from ..common.exceptions import ShapeError
from ..common.types import LatentGrid, VideoTensor
from ..prior.network import FrameDecoder, FrameEncoder


class TinyVAE(nn.Module):
    """
    Deterministic per-frame conv autoencoder standing in for a pretrained video VAE.

    Args:
        latent_dim (int): Latent channels d_v.
        hidden (int): Convolution width.
        stride (int): Spatial downsampling, a power of two.
    """

    def __init__(self, latent_dim: int, hidden: int, stride: int):
        super().__init__()
        self.stride = stride
        self.encoder = FrameEncoder(hidden, latent_dim, stride)
        self.decoder = FrameDecoder(latent_dim, hidden, stride)

    def parameter_groups(self) -> Dict[str, List[nn.Parameter]]:
        return {
            "vae_encoder": list(self.encoder.parameters()),
            "vae_decoder": list(self.decoder.parameters()),
        }

    def encode(self, x: VideoTensor) -> LatentGrid:
        """(B, T, H, W, 3) -> (B, T, H/stride, W/stride, d_v)

        Raises:
            ShapeError: If H or W is not divisible by the stride.
        """
        b, _, height, width, _ = x.shape
        for name, size in (("H", height), ("W", width)):
            if size % self.stride:
                raise ShapeError(f"{name}={size} is not divisible by the VAE stride {self.stride}", dimension=name)

        z = self.encoder(rearrange(x, "b t h w c -> (b t) c h w"))
        return rearrange(z, "(b t) d h w -> b t h w d", b=b)

    def decode(self, z: LatentGrid) -> VideoTensor:
        """(B, t, h, w, d_v) -> (B, t, h*stride, w*stride, 3) clamped to [0, 1]"""
        b = z.shape[0]
        x = self.decoder(rearrange(z, "b t h w d -> (b t) d h w"))
        return rearrange(x, "(b t) c h w -> b t h w c", b=b).clamp(0.0, 1.0)

    def forward(self, x: VideoTensor) -> VideoTensor:
        return self.decode(self.encode(x))
