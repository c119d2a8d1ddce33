from typing import Tuple

import numpy as np
import torch
import torch.nn.functional as F
from einops import rearrange

from ..common.exceptions import ShapeError


def sampling_grid(flow: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Absolute sampling positions p + flow(p) and their in-frame mask.

    Args:
        flow (torch.Tensor): (..., H, W, 2) displacements ordered (dx, dy).

    Returns:
        Tuple[torch.Tensor, torch.Tensor]: x and y positions, each (..., H, W)
    """
    height, width = flow.shape[-3], flow.shape[-2]
    rows = torch.arange(height, dtype=flow.dtype, device=flow.device)
    cols = torch.arange(width, dtype=flow.dtype, device=flow.device)
    grid_y, grid_x = torch.meshgrid(rows, cols, indexing="ij")

    return grid_x + flow[..., 0], grid_y + flow[..., 1]


def warp(frames: torch.Tensor, flow: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Backward-warps frames by a flow: output(p) = frames(p + flow(p)) with bilinear sampling.

    Out-of-frame samples replicate the border and are marked invalid in the mask. Sampling runs in 64-bit so integer
    displacements are interpolation free.

    Args:
        frames (torch.Tensor): (..., H, W, C) channels-last frames.
        flow (torch.Tensor): (..., H, W, 2) displacements with the same leading dims.

    Raises:
        ShapeError: If frames and flow disagree on their leading or spatial dims.

    Returns:
        Tuple[torch.Tensor, torch.Tensor]: The warped frames (same dtype as frames) and a boolean (..., H, W) mask that
        is True where the sample position lies inside the frame
    """
    if flow.shape[-1] != 2:
        raise ShapeError(f"flow must end in 2 channels, got {tuple(flow.shape)}", dimension="flow")
    if frames.shape[:-1] != flow.shape[:-1]:
        raise ShapeError(
            f"frames {tuple(frames.shape)} and flow {tuple(flow.shape)} do not align",
            dimension="H" if frames.shape[-3] != flow.shape[-3] else "W",
        )

    leading = frames.shape[:-3]
    height, width, channels = frames.shape[-3:]

    sample_x, sample_y = sampling_grid(flow.to(torch.float64))
    mask = (sample_x >= 0) & (sample_x <= width - 1) & (sample_y >= 0) & (sample_y <= height - 1)

    # grid_sample with align_corners=True maps -1 and 1 onto the first and last pixel centers
    norm_x = 2.0 * sample_x / max(width - 1, 1) - 1.0
    norm_y = 2.0 * sample_y / max(height - 1, 1) - 1.0
    grid = torch.stack([norm_x, norm_y], dim=-1).reshape(-1, height, width, 2)

    source = rearrange(frames.to(torch.float64).reshape(-1, height, width, channels), "n h w c -> n c h w")
    sampled = F.grid_sample(source, grid, mode="bilinear", padding_mode="border", align_corners=True)
    warped = rearrange(sampled, "n c h w -> n h w c").reshape(*leading, height, width, channels)

    return warped.to(frames.dtype), mask


def warp_array(frame: np.ndarray, flow: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """numpy convenience wrapper around warp"""
    warped, mask = warp(torch.from_numpy(np.asarray(frame)), torch.from_numpy(np.asarray(flow)))

    return warped.numpy(), mask.numpy()
