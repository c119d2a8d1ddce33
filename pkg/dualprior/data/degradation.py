import logging

import numpy as np
from scipy import fft, ndimage

from ..common.constants import DCT_BLOCK, JPEG_LUMA_TABLE
from ..common.exceptions import ShapeError
from ..common.random import keyed_rng
from ..metrics import quality as metrics
from .models import DegradationLog, DegradeConfig, VideoClip

log = logging.getLogger(__name__)


def quantization_table(quality: int) -> np.ndarray:
    """IJG-style quality scaling of the base luminance table, on the 0-255 intensity scale"""
    quality = int(np.clip(quality, 1, 100))
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    table = np.floor((np.asarray(JPEG_LUMA_TABLE, dtype=np.float64) * scale + 50.0) / 100.0)

    return np.clip(table, 1.0, 255.0)


def blur(frames: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0.0:
        return frames
    return ndimage.gaussian_filter(frames, sigma=(0.0, sigma, sigma, 0.0), mode="reflect")


def downscale(frames: np.ndarray, factor: int) -> np.ndarray:
    """Area downscaling by block averaging"""
    if factor == 1:
        return frames
    t, h, w, c = frames.shape
    return frames.reshape(t, h // factor, factor, w // factor, factor, c).mean(axis=(2, 4))


def upscale(frames: np.ndarray, factor: int) -> np.ndarray:
    """Bilinear upscaling back to the original grid"""
    if factor == 1:
        return frames
    return ndimage.zoom(frames, (1, factor, factor, 1), order=1, mode="nearest", grid_mode=True)


def add_noise(frames: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma <= 0.0:
        return frames
    return frames + sigma * rng.standard_normal(frames.shape)


def block_dct_compress(frames: np.ndarray, quality: int) -> np.ndarray:
    """Compression surrogate: 8x8 block DCT with quality-scaled quantization, per channel.

    Frames are edge-padded to a multiple of the block size and cropped back afterwards. Quality 100 is treated as
    lossless and returns the input unchanged.

    Args:
        frames (np.ndarray): T x H x W x C array in [0, 1].
        quality (int): Quality in [1, 100].

    Returns:
        np.ndarray: The compressed frames, same shape
    """
    if quality >= 100:
        return frames

    t, h, w, c = frames.shape
    pad_h, pad_w = (-h) % DCT_BLOCK, (-w) % DCT_BLOCK
    padded = np.pad(frames, ((0, 0), (0, pad_h), (0, pad_w), (0, 0)), mode="edge") * 255.0 - 128.0

    hb, wb = padded.shape[1] // DCT_BLOCK, padded.shape[2] // DCT_BLOCK
    # t, hb, wb, c, 8, 8
    blocks = padded.reshape(t, hb, DCT_BLOCK, wb, DCT_BLOCK, c).transpose(0, 1, 3, 5, 2, 4)

    table = quantization_table(quality)
    coefficients = fft.dctn(blocks, axes=(-2, -1), norm="ortho")
    coefficients = np.round(coefficients / table) * table
    blocks = fft.idctn(coefficients, axes=(-2, -1), norm="ortho")

    restored = blocks.transpose(0, 1, 4, 2, 5, 3).reshape(padded.shape)
    restored = (restored + 128.0) / 255.0

    return restored[:, :h, :w, :]


def sample_degradation(cfg: DegradeConfig, clip_index: int) -> DegradationLog:
    """Draws one set of pipeline parameters from the (cfg.seed, clip_index) stream"""
    rng = keyed_rng(cfg.seed, clip_index, "degrade")

    blur_sigma = float(rng.uniform(*cfg.blur_sigma_range))
    factor = int(cfg.downscale_factors[int(rng.integers(0, len(cfg.downscale_factors)))])
    noise_sigma = float(rng.uniform(*cfg.noise_sigma_range))
    lo, hi = cfg.jpeg_like_quality_range
    quality = int(rng.integers(lo, hi + 1))

    return DegradationLog(
        clip_index=clip_index,
        seed=cfg.seed,
        blur_sigma=blur_sigma,
        downscale_factor=factor,
        noise_sigma=noise_sigma,
        quality=quality,
    )


def degrade(clip: VideoClip, cfg: DegradeConfig, clip_index: int = 0) -> VideoClip:
    """Synthesizes the LQ counterpart of a clip.

    The pipeline runs blur -> downscale -> noise -> compression surrogate -> upscale and clamps to [0, 1]. It is a
    pure function of (clip, cfg, clip_index): parameters and noise come from a counter-based stream keyed on
    (cfg.seed, clip_index).

    Args:
        clip (VideoClip): The HQ clip.
        cfg (DegradeConfig): Parameter ranges and seed.
        clip_index (int): Stream index, so clips of one dataset get independent parameters. Defaults to 0.

    Raises:
        ShapeError: If the sampled downscale factor does not divide H and W.

    Returns:
        VideoClip: The degraded clip, same shape, carrying its DegradationLog
    """
    _, height, width, _ = clip.shape
    for factor in cfg.downscale_factors:
        if height % factor or width % factor:
            raise ShapeError(
                f"downscale factor {factor} does not divide {height}x{width}",
                dimension="H" if height % factor else "W",
                factor=factor,
            )

    params = sample_degradation(cfg, clip_index)
    noise_rng = keyed_rng(cfg.seed, clip_index, "degrade-noise")

    frames = clip.frames.astype(np.float64)
    frames = blur(frames, params.blur_sigma)
    frames = downscale(frames, params.downscale_factor)
    frames = add_noise(frames, params.noise_sigma, noise_rng)
    frames = block_dct_compress(frames, params.quality)
    frames = upscale(frames, params.downscale_factor)
    frames = np.clip(frames, 0.0, 1.0).astype(clip.frames.dtype)
    params.psnr_db = metrics.psnr(frames, clip.frames)

    log.info(
        f"degraded {clip.name or 'clip'} (index {clip_index}): blur={params.blur_sigma:.3f} "
        f"factor={params.downscale_factor} noise={params.noise_sigma:.4f} quality={params.quality} "
        f"psnr={params.psnr_db:.2f} dB"
    )

    name = f"{clip.name}_lq" if clip.name else None

    return VideoClip(frames=frames, name=name, degradation=params)
