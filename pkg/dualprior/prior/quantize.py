from typing import NamedTuple

import torch
import torch.nn.functional as F
from torch import nn

from ..common.exceptions import CodeIndexError, ShapeError
from ..common.types import CodeIndexGrid, LatentGrid


class Quantized(NamedTuple):
    """Output of a codebook lookup: the selected entries and their indices"""

    values: LatentGrid
    indices: CodeIndexGrid


class Codebook(nn.Module):
    """
    A K x d table of prototype embeddings, updated by plain gradient descent.

    Args:
        size (int): Number of entries K, at least 2.
        dim (int): Code dimension d.
    """

    def __init__(self, size: int, dim: int):
        super().__init__()
        if size < 2:
            raise ValueError(f"a codebook needs at least 2 entries, got {size}")

        self.entries = nn.Parameter(torch.empty(size, dim))
        nn.init.uniform_(self.entries, -1.0 / size, 1.0 / size)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def dim(self) -> int:
        return self.entries.shape[1]

    def lookup(self, indices: CodeIndexGrid) -> LatentGrid:
        """Entries at the given indices. Gradients flow into the selected entries.

        Raises:
            CodeIndexError: If any index lies outside [0, K).
        """
        if indices.numel() and (indices.min() < 0 or indices.max() >= self.size):
            raise CodeIndexError(
                f"code indices must lie within [0, {self.size}), got [{int(indices.min())}, {int(indices.max())}]",
                {"size": self.size},
            )
        return F.embedding(indices, self.entries)

    def distances(self, z: LatentGrid) -> torch.Tensor:
        """Squared L2 distance from every token of z to every entry, shape z.shape[:-1] + (K,)"""
        return ((z.unsqueeze(-2) - self.entries) ** 2).sum(dim=-1)

    def nearest(self, z: LatentGrid) -> CodeIndexGrid:
        """Nearest entry per token. Ties go to the smallest index."""
        if z.shape[-1] != self.dim:
            raise ShapeError(
                f"latent dim {z.shape[-1]} does not match codebook dim {self.dim}", dimension="d"
            )
        with torch.no_grad():
            # argmin returns the first minimal index
            return torch.argmin(self.distances(z.detach()), dim=-1)


def quantize(z: LatentGrid, codebook: Codebook, straight_through: bool = False) -> Quantized:
    """Nearest-neighbor quantization of a latent grid.

    Args:
        z (LatentGrid): (..., d) latent tokens.
        codebook (Codebook): The codebook, with matching d.
        straight_through (bool): If True the returned values are z + sg(q - z), passing gradients to z as the
          identity and none to the codebook. Otherwise they are the selected entries, differentiable w.r.t. the
          codebook. Defaults to False.

    Raises:
        ShapeError: If z's last dim differs from the codebook dim.

    Returns:
        Quantized: The quantized values and the (...,) index grid
    """
    indices = codebook.nearest(z)
    values = codebook.lookup(indices)

    if straight_through:
        values = z + (values - z).detach()

    return Quantized(values=values, indices=indices)
