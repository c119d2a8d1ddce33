import logging
from typing import List, Tuple

import numpy as np

from ..common.exceptions import ConfigurationError, ShapeError
from ..data.models import FlowFieldSequence, VideoClip

log = logging.getLogger(__name__)


def candidate_displacements(radius: int) -> List[Tuple[int, int]]:
    """All (dx, dy) with |dx|, |dy| <= radius, ordered by magnitude, then dx, then dy"""
    candidates = [(dx, dy) for dx in range(-radius, radius + 1) for dy in range(-radius, radius + 1)]
    return sorted(candidates, key=lambda d: (d[0] ** 2 + d[1] ** 2, d[0], d[1]))


def _match_pair(target: np.ndarray, source: np.ndarray, block: int, radius: int) -> np.ndarray:
    """Per-block displacement d minimizing |target(p) - source(p + d)| over the block.

    Pixels whose displaced position leaves the frame are excluded and the sum is rescaled to the full block, so a
    block at the border still finds its true displacement. Returns an H x W x 2 flow.
    """
    height, width, channels = target.shape
    hb, wb = height // block, width // block

    padded = np.pad(
        source.astype(np.float64),
        ((radius, radius), (radius, radius), (0, 0)),
        mode="constant",
        constant_values=np.nan,
    )
    candidates = candidate_displacements(radius)
    costs = np.empty((len(candidates), hb, wb))
    full = float(block * block * channels)

    for k, (dx, dy) in enumerate(candidates):
        shifted = padded[radius + dy : radius + dy + height, radius + dx : radius + dx + width]
        difference = np.abs(target - shifted).reshape(hb, block, wb, block, channels)
        valid = np.count_nonzero(~np.isnan(difference), axis=(1, 3, 4))
        total = np.nansum(difference, axis=(1, 3, 4))
        costs[k] = np.where(valid > 0, total * full / np.maximum(valid, 1), np.inf)

    # argmin keeps the first minimum, which is the tie-break order of the candidate list
    best = np.argmin(costs, axis=0)
    chosen = np.asarray(candidates, dtype=np.float32)[best]

    return np.repeat(np.repeat(chosen, block, axis=0), block, axis=1)


def block_match_flow(clip: VideoClip, block: int, radius: int) -> FlowFieldSequence:
    """Estimates integer forward and backward flows by exhaustive block matching.

    For every block of frame i+1 the search finds the displacement d with frame_{i+1}(p) closest to frame_i(p + d) in
    summed absolute difference (the forward flow), and symmetrically for the backward flow. Ties go to the smallest
    displacement magnitude, then to the lexicographically smallest (dx, dy).

    Args:
        clip (VideoClip): The clip, T >= 2.
        block (int): Block edge length, must divide H and W.
        radius (int): Search radius in pixels, at most block.

    Raises:
        ConfigurationError: If block or radius is out of range.
        ShapeError: If block does not divide H or W.

    Returns:
        FlowFieldSequence: Block-constant integer flows
    """
    if block < 1 or radius < 0 or radius > block:
        raise ConfigurationError(
            f"invalid block geometry: block={block}, radius={radius} (need block >= 1, 0 <= radius <= block)",
            {"block": block, "radius": radius},
        )

    _, height, width, _ = clip.shape
    if height % block:
        raise ShapeError(f"block {block} does not divide H={height}", dimension="H")
    if width % block:
        raise ShapeError(f"block {block} does not divide W={width}", dimension="W")

    frames = clip.frames.astype(np.float64)
    forward, backward = [], []
    for i in range(clip.frame_count - 1):
        forward.append(_match_pair(frames[i + 1], frames[i], block, radius))
        backward.append(_match_pair(frames[i], frames[i + 1], block, radius))

    log.debug(f"block matched {clip.name or 'clip'}: block={block} radius={radius}")

    return FlowFieldSequence(forward=np.stack(forward), backward=np.stack(backward))
