from typing import NamedTuple

import torch
from torch import nn

from ..common.exceptions import ShapeError
from ..common.types import LatentGrid


class ModulationParams(NamedTuple):
    """Channel-wise scale and shift, each (B, C)"""

    gamma: torch.Tensor
    beta: torch.Tensor


class ModulationNet(nn.Module):
    """
    MLP(Pool(f_t)) -> (gamma, beta). Pool is the arithmetic mean over (t, h, w); the last layer starts at zero so
    the modulation starts as the identity.

    Args:
        prior_dim (int): Code dimension d of f_t.
        hidden (int): Hidden width.
        channels (int): Backbone width C; the MLP emits 2C values.
    """

    def __init__(self, prior_dim: int, hidden: int, channels: int):
        super().__init__()
        self.channels = channels
        self.mlp = nn.Sequential(
            nn.Linear(prior_dim, hidden),
            nn.GELU(),
            nn.Linear(hidden, 2 * channels),
        )
        nn.init.zeros_(self.mlp[-1].weight)
        nn.init.zeros_(self.mlp[-1].bias)

    @staticmethod
    def pool(f_t: LatentGrid) -> torch.Tensor:
        return f_t.mean(dim=(1, 2, 3))

    def forward(self, f_t: LatentGrid) -> ModulationParams:
        gamma, beta = self.mlp(self.pool(f_t)).chunk(2, dim=-1)
        return ModulationParams(gamma=gamma, beta=beta)


def apply_modulation(x: torch.Tensor, params: ModulationParams) -> torch.Tensor:
    """(1 + gamma) * x + beta, per channel.

    Args:
        x (torch.Tensor): (B, N, C) tokens, or (N, C) with unbatched (C,) parameters.
        params (ModulationParams): The scale and shift.

    Raises:
        ShapeError: If the channel dims differ.

    Returns:
        torch.Tensor: The modulated tokens
    """
    gamma, beta = params
    if gamma.shape[-1] != x.shape[-1] or beta.shape[-1] != x.shape[-1]:
        raise ShapeError(
            f"modulation width {gamma.shape[-1]} does not match token width {x.shape[-1]}", dimension="C"
        )
    if x.ndim == gamma.ndim + 1:
        gamma, beta = gamma.unsqueeze(-2), beta.unsqueeze(-2)

    return (1 + gamma) * x + beta
