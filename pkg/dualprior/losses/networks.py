from typing import List

import torch
from einops import rearrange
from torch import nn

from ..common.random import seeded_init
from ..common.types import VideoTensor


class FeatureExtractor(nn.Module):
    """
    A fixed, randomly initialized 3-level conv pyramid used as the perceptual feature space.

    The parameters never train: they are frozen at construction and the module stays in eval mode.

    Args:
        seed (int): Initialization seed.
        channels (tuple): Widths of the three levels.
    """

    def __init__(self, seed: int = 1234, channels=(16, 32, 64)):
        super().__init__()
        with seeded_init(seed, "perceptual"):
            levels, previous = [], 3
            for index, width in enumerate(channels):
                layers: List[nn.Module] = [] if index == 0 else [nn.AvgPool2d(2)]
                layers += [nn.Conv2d(previous, width, 3, padding=1), nn.ReLU()]
                levels.append(nn.Sequential(*layers))
                previous = width
            self.levels = nn.ModuleList(levels)

        self.requires_grad_(False)
        super().train(False)

    def train(self, mode: bool = True) -> "FeatureExtractor":
        return self

    def features(self, video: VideoTensor) -> List[torch.Tensor]:
        x = rearrange(video, "b t h w c -> (b t) c h w")
        maps = []
        for level in self.levels:
            x = level(x)
            maps.append(x)
        return maps

    def distance(self, a: VideoTensor, b: VideoTensor) -> torch.Tensor:
        """Mean over levels of the mean squared feature difference"""
        pairs = zip(self.features(a), self.features(b))
        return torch.stack([((fa - fb) ** 2).mean() for fa, fb in pairs]).mean()


class Discriminator(nn.Module):
    """Per-frame strided conv classifier returning one logit per frame, (B, T)"""

    def __init__(self, channels: int = 32):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(3, channels, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(channels, 2 * channels, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(2 * channels, 4 * channels, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(4 * channels, 1, 3, padding=1),
        )

    def forward(self, video: VideoTensor) -> torch.Tensor:
        b = video.shape[0]
        logits = self.net(rearrange(video, "b t h w c -> (b t) c h w")).mean(dim=(1, 2, 3))
        return rearrange(logits, "(b t) -> b t", b=b)
