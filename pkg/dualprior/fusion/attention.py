import torch
import torch.nn.functional as F
from einops import rearrange
from torch import nn

from ..common.exceptions import ShapeError
from ..common.types import LatentGrid


def flatten_grid(grid: LatentGrid) -> torch.Tensor:
    return rearrange(grid, "b t h w d -> b (t h w) d")


class CrossRefine(nn.Module):
    """
    Attention with queries from the temporal prior and keys/values from the spatial prior.

    Args:
        prior_dim (int): Code dimension d of both priors.
        dim (int): Projection width.
        heads (int): Attention heads, must divide dim.
    """

    def __init__(self, prior_dim: int, dim: int, heads: int = 1):
        super().__init__()
        if dim % heads:
            raise ValueError(f"heads ({heads}) must divide the attention width ({dim})")
        self.heads = heads
        self.w_q = nn.Linear(prior_dim, dim, bias=False)
        self.w_k = nn.Linear(prior_dim, dim, bias=False)
        self.w_v = nn.Linear(prior_dim, dim, bias=False)

    def forward(self, f_t: LatentGrid, f_s: LatentGrid) -> torch.Tensor:
        """Delta x over the flattened t*h*w tokens, (B, N, dim)

        Raises:
            ShapeError: If f_t and f_s differ in grid dims.
        """
        if f_t.shape != f_s.shape:
            raise ShapeError(
                f"temporal prior {tuple(f_t.shape)} and spatial prior {tuple(f_s.shape)} differ",
                dimension="grid",
            )

        split = lambda x: rearrange(x, "b n (heads c) -> b heads n c", heads=self.heads)
        q = split(self.w_q(flatten_grid(f_t)))
        k = split(self.w_k(flatten_grid(f_s)))
        v = split(self.w_v(flatten_grid(f_s)))

        attended = F.scaled_dot_product_attention(q, k, v)

        return rearrange(attended, "b heads n c -> b n (heads c)")
