import logging
from typing import List, NamedTuple, Optional

import torch
from torch import nn

from ..common.enums import FusionVariant, PriorMode
from ..common.exceptions import ShapeError
from ..common.types import LatentGrid
from .attention import CrossRefine, flatten_grid
from .models import FusionConfig
from .modulation import ModulationNet, ModulationParams, apply_modulation

log = logging.getLogger(__name__)


def _zero_linear(in_features: int, out_features: int) -> nn.Linear:
    layer = nn.Linear(in_features, out_features)
    nn.init.zeros_(layer.weight)
    nn.init.zeros_(layer.bias)
    return layer


class FusionContext(NamedTuple):
    """Per-forward state shared by every block: the priors and the shared modulation, computed once"""

    spatial: LatentGrid
    temporal: LatentGrid
    modulation: Optional[ModulationParams]


class FusionBlock(nn.Module):
    """
    The per-block part of the fusion: projections and the zero-initialized output Proj.

    Args:
        prior_dim (int): Code dimension of the priors.
        channels (int): Backbone width.
        config (FusionConfig): Variant and sizes.
    """

    def __init__(self, prior_dim: int, channels: int, config: FusionConfig):
        super().__init__()
        dim = config.attention_dim or channels
        self.variant = config.variant
        self.prior_mode = config.prior_mode

        self.cross: Optional[CrossRefine] = None
        self.w_v: Optional[nn.Linear] = None
        self.w_joint: Optional[nn.Linear] = None
        self.modulation: Optional[ModulationNet] = None

        if self.prior_mode == PriorMode.SPATIAL or (
            self.prior_mode == PriorMode.BOTH and self.variant == FusionVariant.SIMPLE_SPATIAL
        ):
            self.w_v = nn.Linear(prior_dim, dim, bias=False)
        elif self.prior_mode == PriorMode.BOTH and self.variant == FusionVariant.SYMMETRIC:
            self.w_joint = nn.Linear(2 * prior_dim, dim, bias=False)
        elif self.prior_mode == PriorMode.BOTH:
            self.cross = CrossRefine(prior_dim, dim, config.attention_heads)

        if self.prior_mode == PriorMode.BOTH and self.variant == FusionVariant.INDEPENDENT_MODULATION:
            self.modulation = ModulationNet(prior_dim, config.modulation_hidden, channels)

        self.proj = _zero_linear(dim, channels) if self.prior_mode != PriorMode.TEMPORAL else None

    def residual(self, f_s: LatentGrid, f_t: LatentGrid) -> Optional[torch.Tensor]:
        """Proj(Delta x), or None when the block injects no token residual"""
        if self.cross is not None:
            delta = self.cross(f_t, f_s)
        elif self.w_v is not None:
            delta = self.w_v(flatten_grid(f_s))
        elif self.w_joint is not None:
            delta = self.w_joint(flatten_grid(torch.cat([f_s, f_t], dim=-1)))
        else:
            return None
        return self.proj(delta)


class PriorFusion(nn.Module):
    """
    Injects the spatial and temporal priors into every backbone block.

    With the asymmetric design the temporal prior drives one (gamma, beta) pair shared by all blocks, and queries a
    cross-attention over the spatial prior whose projected output is added to the tokens:
    x' = (1 + gamma) * x + beta + Proj(Attn(W_q f_t, W_k f_s, W_v f_s)). Every output projection starts at zero, so
    a fresh module leaves the backbone unchanged.

    Args:
        prior_dim (int): Code dimension of the priors.
        channels (int): Backbone width.
        blocks (int): Number of backbone blocks.
        config (FusionConfig): Variant, prior mode and sizes.
    """

    def __init__(self, prior_dim: int, channels: int, blocks: int, config: FusionConfig):
        super().__init__()
        self.config = config
        self.channels = channels

        shared = config.prior_mode == PriorMode.TEMPORAL or (
            config.prior_mode == PriorMode.BOTH
            and config.variant
            in (FusionVariant.ASYMMETRIC, FusionVariant.SIMPLE_SPATIAL)
        )
        self.modulation = (
            ModulationNet(prior_dim, config.modulation_hidden, channels) if shared else None
        )
        self.blocks = nn.ModuleList(FusionBlock(prior_dim, channels, config) for _ in range(blocks))

    def compute_modulation(self, f_t: LatentGrid) -> Optional[ModulationParams]:
        """The shared (gamma, beta), or None when the configuration has no shared modulation"""
        if self.modulation is None:
            return None
        return self.modulation(f_t)

    def prepare(self, f_s: LatentGrid, f_t: LatentGrid) -> FusionContext:
        if f_s.shape != f_t.shape:
            raise ShapeError(
                f"spatial prior {tuple(f_s.shape)} and temporal prior {tuple(f_t.shape)} differ", dimension="grid"
            )
        return FusionContext(spatial=f_s, temporal=f_t, modulation=self.compute_modulation(f_t))

    def modulation_for(self, index: int, context: FusionContext) -> Optional[ModulationParams]:
        block = self.blocks[index]
        if block.modulation is not None:
            return block.modulation(context.temporal)
        return context.modulation

    def fuse(self, index: int, x: torch.Tensor, context: FusionContext) -> torch.Tensor:
        """Applies block `index`'s fusion to (B, N, C) tokens.

        Raises:
            ShapeError: If the prior grid holds a different number of tokens than x.
        """
        tokens = context.spatial.shape[1] * context.spatial.shape[2] * context.spatial.shape[3]
        if tokens != x.shape[1]:
            raise ShapeError(
                f"prior grid has {tokens} tokens, backbone has {x.shape[1]}", dimension="tokens"
            )

        modulation = self.modulation_for(index, context)
        if modulation is not None:
            x = apply_modulation(x, modulation)

        residual = self.blocks[index].residual(context.spatial, context.temporal)
        if residual is not None:
            x = x + residual

        return x

    def nonzero_output_layers(self) -> List[str]:
        """Names of output layers that are not all-zero, empty for a fresh module"""
        names = []
        for name, module in self.named_modules():
            last = module.mlp[-1] if isinstance(module, ModulationNet) else getattr(module, "proj", None)
            if isinstance(last, nn.Linear) and (last.weight.any() or last.bias.any()):
                names.append(name)
        return names


def fuse(
    x: torch.Tensor,
    f_s: LatentGrid,
    f_t: LatentGrid,
    fusion: PriorFusion,
    index: int = 0,
) -> torch.Tensor:
    """One-shot fusion of tokens with both priors through block `index`"""
    return fusion.fuse(index, x, fusion.prepare(f_s, f_t))
