from typing import Union

import numpy as np
import torch
from scipy import ndimage

from ..common.constants import (
    EWARP_SCALE,
    PSNR_CAP_DB,
    SSIM_K1,
    SSIM_K2,
    SSIM_SIGMA,
    SSIM_WINDOW,
)
from ..common.exceptions import ShapeError
from ..data.models import FlowFieldSequence, VideoClip
from ..flow.warp import warp

ClipLike = Union[VideoClip, np.ndarray]


def _frames(clip: ClipLike) -> np.ndarray:
    frames = clip.frames if isinstance(clip, VideoClip) else np.asarray(clip)
    return frames.astype(np.float64)


def _paired(a: ClipLike, b: ClipLike):
    a, b = _frames(a), _frames(b)
    if a.shape != b.shape:
        raise ShapeError(f"clips differ in shape: {a.shape} vs {b.shape}")
    if a.ndim != 4:
        raise ShapeError(f"clips must be T x H x W x C, got {a.shape}")
    return a, b


def frame_psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR of one frame pair for a peak of 1.0, capped for identical frames"""
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def psnr(a: ClipLike, b: ClipLike) -> float:
    """Mean per-frame PSNR in dB.

    Args:
        a (ClipLike): A clip or T x H x W x C array in [0, 1].
        b (ClipLike): Same shape as a.

    Raises:
        ShapeError: If the shapes differ.

    Returns:
        float: 10 log10(1 / MSE) averaged over frames, PSNR_CAP_DB for identical frames
    """
    a, b = _paired(a, b)
    return float(np.mean([frame_psnr(x, y) for x, y in zip(a, b)]))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1D Gaussian taps; the 2D window is their outer product"""
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    taps = np.exp(-(offsets**2) / (2.0 * sigma**2))
    return taps / taps.sum()


def _filter_valid(image: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable Gaussian filtering restricted to positions where the whole window fits"""
    filtered = ndimage.correlate1d(image, taps, axis=0, mode="nearest")
    filtered = ndimage.correlate1d(filtered, taps, axis=1, mode="nearest")
    half = len(taps) // 2
    return filtered[half : image.shape[0] - half, half : image.shape[1] - half]


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """SSIM map of two single-channel H x W images over valid window positions"""
    taps = gaussian_window()
    c1, c2 = SSIM_K1**2, SSIM_K2**2

    mu_a = _filter_valid(a, taps)
    mu_b = _filter_valid(b, taps)
    var_a = _filter_valid(a * a, taps) - mu_a * mu_a
    var_b = _filter_valid(b * b, taps) - mu_b * mu_b
    cov = _filter_valid(a * b, taps) - mu_a * mu_b

    numerator = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    denominator = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)

    return numerator / denominator


def ssim(a: ClipLike, b: ClipLike) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over frames and channels.

    Raises:
        ShapeError: If the shapes differ or frames are smaller than the window.
    """
    a, b = _paired(a, b)
    _, height, width, channels = a.shape
    if min(height, width) < SSIM_WINDOW:
        raise ShapeError(
            f"frames of {height}x{width} are smaller than the {SSIM_WINDOW}px SSIM window",
            dimension="H" if height < SSIM_WINDOW else "W",
        )

    scores = [
        ssim_map(a[i, ..., c], b[i, ..., c]).mean() for i in range(a.shape[0]) for c in range(channels)
    ]
    return float(np.mean(scores))


def warping_error(clip: ClipLike, flows: FlowFieldSequence) -> float:
    """Temporal consistency of a clip under given flows, reported x10^3.

    Mean over frame pairs of the masked mean squared difference between warp(frame_i, forward_i) and frame_{i+1}.

    Args:
        clip (ClipLike): The clip to score, T >= 2.
        flows (FlowFieldSequence): Flows of the reference motion, T - 1 pairs.

    Raises:
        ShapeError: If the flow count or frame size does not match the clip.

    Returns:
        float: The warping error times EWARP_SCALE
    """
    frames = _frames(clip)
    if flows.pair_count != frames.shape[0] - 1:
        raise ShapeError(
            f"{flows.pair_count} flow pairs for a clip of {frames.shape[0]} frames", dimension="T"
        )
    if flows.forward.shape[1:3] != frames.shape[1:3]:
        raise ShapeError(
            f"flows of {flows.forward.shape[1:3]} for frames of {frames.shape[1:3]}", dimension="H"
        )

    source = torch.from_numpy(frames[:-1])
    warped, mask = warp(source, torch.from_numpy(flows.forward.astype(np.float64)))
    warped, mask = warped.numpy(), mask.numpy()

    errors = []
    for i in range(frames.shape[0] - 1):
        valid = mask[i]
        if not valid.any():
            continue
        squared = (warped[i] - frames[i + 1]) ** 2
        errors.append(float(squared[valid].mean()))

    return float(np.mean(errors)) * EWARP_SCALE if errors else 0.0
