import logging
import math
from typing import Dict, List, NamedTuple

import torch
import torch.nn.functional as F
from einops import rearrange, reduce, repeat
from torch import nn

from ..common.enums import CodebookKind
from ..common.exceptions import CapacityError, ShapeError
from ..common.random import seeded_init
from ..common.types import CodeIndexGrid, LatentGrid, VideoTensor
from .models import PriorConfig
from .quantize import Codebook, Quantized, quantize

log = logging.getLogger(__name__)


class Priors(NamedTuple):
    """Quantized prior features, each token an exact codebook entry"""

    spatial: LatentGrid
    temporal: LatentGrid


class CodeIndices(NamedTuple):
    spatial: CodeIndexGrid
    temporal: CodeIndexGrid


class StdcOutput(NamedTuple):
    """
    Everything a Stage-1 reconstruction pass produces.

    Attributes:
        reconstruction: Decoded video (B, T, H, W, 3).
        z_spatial: Spatial path output z_s.
        z_temporal: Temporal interaction output z_t.
        z_h: Channel concatenation [z_s ; z_t].
        z_q: Channel concatenation of the hard selected entries, differentiable w.r.t. the codebooks.
        indices: Nearest-neighbor indices of both paths.
    """

    reconstruction: VideoTensor
    z_spatial: LatentGrid
    z_temporal: LatentGrid
    z_h: LatentGrid
    z_q: LatentGrid
    indices: CodeIndices


class FrameEncoder(nn.Module):
    """Per-frame 2D conv encoder with `log2(stride)` stride-2 stages"""

    def __init__(self, hidden: int, out_dim: int, stride: int):
        super().__init__()
        layers: List[nn.Module] = [nn.Conv2d(3, hidden, 3, padding=1), nn.SiLU()]
        for _ in range(int(math.log2(stride))):
            layers += [nn.Conv2d(hidden, hidden, 4, stride=2, padding=1), nn.SiLU()]
        layers.append(nn.Conv2d(hidden, out_dim, 1))
        self.net = nn.Sequential(*layers)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        # frames: (N, 3, H, W)
        return self.net(frames)


class FrameDecoder(nn.Module):
    """Mirror of FrameEncoder. Outputs are offset by 0.5 so a zeroed network yields mid-gray."""

    def __init__(self, in_dim: int, hidden: int, stride: int):
        super().__init__()
        layers: List[nn.Module] = [nn.Conv2d(in_dim, hidden, 3, padding=1), nn.SiLU()]
        for _ in range(int(math.log2(stride))):
            layers += [nn.ConvTranspose2d(hidden, hidden, 4, stride=2, padding=1), nn.SiLU()]
        layers.append(nn.Conv2d(hidden, 3, 3, padding=1))
        self.net = nn.Sequential(*layers)

    def forward(self, latents: torch.Tensor) -> torch.Tensor:
        return self.net(latents) + 0.5


class TemporalInteraction(nn.Module):
    """TemporalAttn(z) + FrameDiff(z), attention running along t independently at every spatial position"""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.attention = nn.MultiheadAttention(dim, heads, batch_first=True)

    def temporal_attention(self, z: LatentGrid) -> LatentGrid:
        b, t, h, w, d = z.shape
        sequences = rearrange(z, "b t h w d -> (b h w) t d")
        attended, _ = self.attention(sequences, sequences, sequences, need_weights=False)
        return rearrange(attended, "(b h w) t d -> b t h w d", b=b, h=h, w=w)

    @staticmethod
    def frame_difference(z: LatentGrid) -> LatentGrid:
        """z[i] - z[i-1] along t, zero for the first step"""
        return torch.cat([torch.zeros_like(z[:, :1]), z[:, 1:] - z[:, :-1]], dim=1)

    def forward(self, z: LatentGrid) -> LatentGrid:
        if z.shape[1] < 2:
            raise ShapeError(
                f"temporal interaction needs t >= 2, got t={z.shape[1]}", dimension="t"
            )
        return self.temporal_attention(z) + self.frame_difference(z)


class SpatialPath(nn.Module):
    """Conv -> activation -> conv, applied to every latent frame on its own"""

    def __init__(self, dim: int):
        super().__init__()
        self.conv1 = nn.Conv2d(dim, dim, 3, padding=1)
        self.activation = nn.GELU()
        self.conv2 = nn.Conv2d(dim, dim, 3, padding=1)

    def forward(self, z: LatentGrid) -> LatentGrid:
        b = z.shape[0]
        x = rearrange(z, "b t h w d -> (b t) d h w")
        x = self.conv2(self.activation(self.conv1(x)))
        return rearrange(x, "(b t) d h w -> b t h w d", b=b)


class CodePredictor(nn.Module):
    """
    Transformer predicting per-token code logits from a latent grid, with learned factorized (t, h, w) positions.

    Args:
        config (PriorConfig): Sizes.
    """

    def __init__(self, config: PriorConfig):
        super().__init__()
        width = config.transformer_width
        max_t, max_h, max_w = config.max_grid

        self.max_grid = tuple(config.max_grid)
        self.max_tokens = config.max_tokens
        self.in_proj = nn.Linear(config.code_dim, width)
        self.pos_t = nn.Parameter(torch.randn(max_t, width) * 0.02)
        self.pos_h = nn.Parameter(torch.randn(max_h, width) * 0.02)
        self.pos_w = nn.Parameter(torch.randn(max_w, width) * 0.02)

        layer = nn.TransformerEncoderLayer(
            width,
            config.transformer_heads,
            dim_feedforward=4 * width,
            dropout=0.0,
            activation="gelu",
            batch_first=True,
            norm_first=True,
        )
        self.transformer = nn.TransformerEncoder(
            layer, config.transformer_layers, enable_nested_tensor=False
        )
        self.norm = nn.LayerNorm(width)
        self.head = nn.Linear(width, config.codebook_size)

    def positional_encoding(self, t: int, h: int, w: int) -> torch.Tensor:
        """(t*h*w, width) table in (t, h, w) raster order

        Raises:
            CapacityError: If the grid exceeds the token budget or the positional tables.
        """
        if t * h * w > self.max_tokens:
            raise CapacityError(
                f"{t * h * w} tokens exceed the configured maximum of {self.max_tokens}",
                {"tokens": t * h * w, "max_tokens": self.max_tokens},
            )
        if t > self.max_grid[0] or h > self.max_grid[1] or w > self.max_grid[2]:
            raise CapacityError(
                f"grid {(t, h, w)} exceeds the positional tables {self.max_grid}",
                {"grid": (t, h, w), "max_grid": self.max_grid},
            )

        return (
            self.pos_t[:t, None, None] + self.pos_h[None, :h, None] + self.pos_w[None, None, :w]
        ).reshape(t * h * w, -1)

    def logits_from_tokens(self, tokens: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
        """Logits of a (B, N, d) token sequence given (N, width) positional encodings"""
        x = self.in_proj(tokens) + positions
        return self.head(self.norm(self.transformer(x)))

    def forward(self, z: LatentGrid) -> torch.Tensor:
        _, t, h, w, _ = z.shape
        positions = self.positional_encoding(t, h, w)
        return self.logits_from_tokens(rearrange(z, "b t h w d -> b (t h w) d"), positions)


class StdcModel(nn.Module):
    """
    Dual-codebook prior extractor: a shared encoder feeding a temporal interaction path and a spatial path, one
    codebook and one code prediction transformer per path, and a decoder used for Stage-1 reconstruction.

    Args:
        config (PriorConfig): Sizes and init seed. Construction is deterministic in config.seed.
    """

    def __init__(self, config: PriorConfig):
        super().__init__()
        self.config = config

        with seeded_init(config.seed, "stdc"):
            self.encoder = FrameEncoder(config.hidden_channels, config.code_dim, config.spatial_stride)
            self.temporal = TemporalInteraction(config.code_dim, config.temporal_heads)
            self.spatial = SpatialPath(config.code_dim)
            self.codebook_spatial = Codebook(config.codebook_size, config.code_dim)
            self.codebook_temporal = Codebook(config.codebook_size, config.code_dim)
            self.predictor_spatial = CodePredictor(config)
            self.predictor_temporal = CodePredictor(config)
            self.decoder = FrameDecoder(config.code_dim, config.hidden_channels, config.spatial_stride)

    def codebook(self, which: CodebookKind) -> Codebook:
        which = CodebookKind(which)
        return self.codebook_spatial if which == CodebookKind.SPATIAL else self.codebook_temporal

    def predictor(self, which: CodebookKind) -> CodePredictor:
        which = CodebookKind(which)
        return self.predictor_spatial if which == CodebookKind.SPATIAL else self.predictor_temporal

    def parameter_groups(self) -> Dict[str, List[nn.Parameter]]:
        """Named parameter groups used by the stage freeze rules"""
        return {
            "encoder": list(self.encoder.parameters()),
            "temporal": list(self.temporal.parameters()),
            "spatial": list(self.spatial.parameters()),
            "codebooks": [self.codebook_spatial.entries, self.codebook_temporal.entries],
            "transformers": list(self.predictor_spatial.parameters())
            + list(self.predictor_temporal.parameters()),
            "decoder": list(self.decoder.parameters()),
        }

    def encode(self, video: VideoTensor) -> LatentGrid:
        """Embeds a (B, T, H, W, 3) video into a (B, T/s_t, H/s_s, W/s_s, d) latent grid.

        Raises:
            ShapeError: If a dimension is not divisible by its stride, naming the dimension.
        """
        if video.ndim != 5 or video.shape[-1] != 3:
            raise ShapeError(f"expected a (B, T, H, W, 3) video, got {tuple(video.shape)}", dimension="C")

        b, frames, height, width, _ = video.shape
        self.config.grid_shape(frames, height, width)

        video = reduce(video, "b (t s) h w c -> b t h w c", "mean", s=self.config.temporal_stride)
        latents = self.encoder(rearrange(video, "b t h w c -> (b t) c h w"))

        return rearrange(latents, "(b t) d h w -> b t h w d", b=b)

    def temporal_interaction(self, z_l: LatentGrid) -> LatentGrid:
        return self.temporal(z_l)

    def spatial_path(self, z_l: LatentGrid) -> LatentGrid:
        return self.spatial(z_l)

    def quantize(self, z: LatentGrid, which: CodebookKind, straight_through: bool = False) -> Quantized:
        return quantize(z, self.codebook(which), straight_through=straight_through)

    def predict_codes(self, z: LatentGrid, which: CodebookKind) -> torch.Tensor:
        """Per-token logits (B, t*h*w, K) of the path's transformer.

        Raises:
            CapacityError: If the grid holds more tokens than configured.
        """
        return self.predictor(which)(z)

    def paths(self, video: VideoTensor):
        """(z_s, z_t) of a video"""
        z_l = self.encode(video)
        return self.spatial_path(z_l), self.temporal_interaction(z_l)

    def predict_indices(self, x_lq: VideoTensor) -> CodeIndices:
        z_s, z_t = self.paths(x_lq)
        _, t, h, w, _ = z_s.shape

        indices = []
        for z, which in ((z_s, CodebookKind.SPATIAL), (z_t, CodebookKind.TEMPORAL)):
            logits = self.predict_codes(z, which)
            indices.append(rearrange(logits.argmax(dim=-1), "b (t h w) -> b t h w", t=t, h=h, w=w))

        return CodeIndices(*indices)

    def index_agreement(self, x_hq: VideoTensor) -> Dict[str, float]:
        """Fraction of tokens where the predicted indices equal the nearest-neighbor indices of the clean paths"""
        with torch.no_grad():
            predicted = self.predict_indices(x_hq)
            z_s, z_t = self.paths(x_hq)
            nearest_s = self.quantize(z_s, CodebookKind.SPATIAL).indices
            nearest_t = self.quantize(z_t, CodebookKind.TEMPORAL).indices

        return {
            "spatial": float((predicted.spatial == nearest_s).float().mean()),
            "temporal": float((predicted.temporal == nearest_t).float().mean()),
        }

    def extract_priors(self, x_lq: VideoTensor) -> Priors:
        """Predicts code indices from a (possibly degraded) video and looks up the selected entries.

        Returns:
            Priors: f_s and f_t, every token bit-equal to a row of its codebook
        """
        indices = self.predict_indices(x_lq)
        return Priors(
            spatial=self.codebook_spatial.lookup(indices.spatial),
            temporal=self.codebook_temporal.lookup(indices.temporal),
        )

    def decode(self, z_q: LatentGrid) -> VideoTensor:
        """Decodes a latent grid into a (B, T, H, W, 3) video clamped to [0, 1]"""
        if z_q.ndim != 5 or z_q.shape[-1] != self.config.code_dim:
            raise ShapeError(
                f"expected a (B, t, h, w, {self.config.code_dim}) grid, got {tuple(z_q.shape)}", dimension="d"
            )

        b = z_q.shape[0]
        frames = self.decoder(rearrange(z_q, "b t h w d -> (b t) d h w"))
        video = rearrange(frames, "(b t) c h w -> b t h w c", b=b)
        video = repeat(video, "b t h w c -> b (t s) h w c", s=self.config.temporal_stride)

        return video.clamp(0.0, 1.0)

    def reconstruct(self, x_hq: VideoTensor) -> StdcOutput:
        """Stage-1 pass: encode, quantize both paths with straight-through gradients, decode their sum"""
        z_s, z_t = self.paths(x_hq)

        q_s = self.quantize(z_s, CodebookKind.SPATIAL, straight_through=True)
        q_t = self.quantize(z_t, CodebookKind.TEMPORAL, straight_through=True)
        reconstruction = self.decode(q_s.values + q_t.values)

        hard_s = self.codebook_spatial.lookup(q_s.indices)
        hard_t = self.codebook_temporal.lookup(q_t.indices)

        return StdcOutput(
            reconstruction=reconstruction,
            z_spatial=z_s,
            z_temporal=z_t,
            z_h=torch.cat([z_s, z_t], dim=-1),
            z_q=torch.cat([hard_s, hard_t], dim=-1),
            indices=CodeIndices(q_s.indices, q_t.indices),
        )
