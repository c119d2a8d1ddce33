import math
from typing import Optional

import torch
from einops import rearrange
from torch import nn

from ..common.exceptions import CapacityError, ShapeError
from ..common.types import LatentGrid
from ..fusion.module import FusionContext, PriorFusion
from ..prior.network import Priors
from .models import RestorerConfig


def timestep_embedding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    """Sinusoidal features of a (B,) timestep tensor, (B, dim)"""
    half = dim // 2
    freqs = torch.exp(
        -math.log(max_period) * torch.arange(half, dtype=t.dtype, device=t.device) / half
    )
    args = t[:, None] * freqs[None]
    embedding = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2:
        embedding = torch.cat([embedding, torch.zeros_like(embedding[:, :1])], dim=-1)
    return embedding


class TimestepEmbedder(nn.Module):
    def __init__(self, width: int, frequencies: int):
        super().__init__()
        self.frequencies = frequencies
        self.mlp = nn.Sequential(
            nn.Linear(frequencies, width),
            nn.SiLU(),
            nn.Linear(width, width),
        )

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        return self.mlp(timestep_embedding(t, self.frequencies))


class DiTBlock(nn.Module):
    """Pre-norm block: self-attention, cross-attention to the text condition, then an MLP"""

    def __init__(self, width: int, heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(width)
        self.attn = nn.MultiheadAttention(width, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(width)
        self.cross = nn.MultiheadAttention(width, heads, batch_first=True)
        self.norm3 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, 4 * width),
            nn.GELU(approximate="tanh"),
            nn.Linear(4 * width, width),
        )

    def forward(self, x: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h, need_weights=False)[0]
        h = self.norm2(x)
        x = x + self.cross(h, context, context, need_weights=False)[0]
        return x + self.mlp(self.norm3(x))


class VelocityDiT(nn.Module):
    """
    Velocity predictor over patchified latent tokens, with prior fusion applied before every block's self-attention.

    The output head is zero-initialized, so a fresh model predicts zero velocity.

    Args:
        config (RestorerConfig): Sizes.
        prior_dim (int): Code dimension of the priors fed to the fusion modules.
    """

    def __init__(self, config: RestorerConfig, prior_dim: int):
        super().__init__()
        width, p = config.width, config.patch_size
        max_t, max_h, max_w = config.max_grid

        self.config = config
        self.patch_embed = nn.Linear(p * p * config.latent_dim, width)
        self.pos_t = nn.Parameter(torch.randn(max_t, width) * 0.02)
        self.pos_h = nn.Parameter(torch.randn(max_h, width) * 0.02)
        self.pos_w = nn.Parameter(torch.randn(max_w, width) * 0.02)
        self.time_embed = TimestepEmbedder(width, config.timestep_frequencies)
        self.blocks = nn.ModuleList(DiTBlock(width, config.heads) for _ in range(config.depth))
        self.norm_out = nn.LayerNorm(width)
        self.head = nn.Linear(width, p * p * config.latent_dim)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

        self.fusion: Optional[PriorFusion] = None
        if config.fusion.enabled:
            self.fusion = PriorFusion(prior_dim, width, config.depth, config.fusion)

    def backbone_parameters(self):
        """Parameters of the DiT proper, excluding the fusion modules"""
        fusion_ids = {id(p) for p in self.fusion.parameters()} if self.fusion is not None else set()
        return [p for p in self.parameters() if id(p) not in fusion_ids]

    def positional_encoding(self, t: int, h: int, w: int) -> torch.Tensor:
        if t > self.pos_t.shape[0] or h > self.pos_h.shape[0] or w > self.pos_w.shape[0]:
            raise CapacityError(
                f"token grid {(t, h, w)} exceeds the positional tables {tuple(self.config.max_grid)}",
                {"grid": (t, h, w)},
            )
        return (
            self.pos_t[:t, None, None] + self.pos_h[None, :h, None] + self.pos_w[None, None, :w]
        ).reshape(t * h * w, -1)

    def forward(
        self,
        z: LatentGrid,
        t: torch.Tensor,
        c_text: torch.Tensor,
        priors: Optional[Priors] = None,
    ) -> LatentGrid:
        """Predicts the velocity of a (B, t, h, w, d_v) latent.

        Args:
            z (LatentGrid): The noisy latent.
            t (torch.Tensor): (B,) timesteps.
            c_text (torch.Tensor): (B, S, width) or (S, width) text condition tokens.
            priors (Optional[Priors]): f_s and f_t on the token grid. Fusion is skipped when None.

        Returns:
            LatentGrid: The velocity, same shape as z

        Raises:
            ShapeError: If the latent H or W is not divisible by the patch size.
        """
        b, frames, height, width, _ = z.shape
        p = self.config.patch_size
        for name, size in (("H", height), ("W", width)):
            if size % p:
                raise ShapeError(
                    f"latent {name}={size} is not divisible by patch_size={p}",
                    dimension=name,
                    size=size,
                    patch_size=p,
                )
        h, w = height // p, width // p

        x = rearrange(z, "b t (h p1) (w p2) d -> b (t h w) (p1 p2 d)", p1=p, p2=p)
        x = self.patch_embed(x) + self.positional_encoding(frames, h, w)
        x = x + self.time_embed(t.to(x.dtype))[:, None]

        if c_text.ndim == 2:
            c_text = c_text.unsqueeze(0).expand(b, -1, -1)

        context: Optional[FusionContext] = None
        if priors is not None and self.fusion is not None:
            context = self.fusion.prepare(priors.spatial, priors.temporal)

        for index, block in enumerate(self.blocks):
            if context is not None:
                x = self.fusion.fuse(index, x, context)
            x = block(x, c_text)

        x = self.head(self.norm_out(x))

        return rearrange(
            x, "b (t h w) (p1 p2 d) -> b t (h p1) (w p2) d", t=frames, h=h, w=w, p1=p, p2=p
        )
