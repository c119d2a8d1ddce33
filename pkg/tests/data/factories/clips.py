from typing import Tuple

import numpy as np

from dualprior.common.enums import BackgroundKind, MotionKind
from dualprior.data.models import FlowFieldSequence, MotionSpec, VideoClip
from dualprior.data.synthesis import make_toy_clip


def create_dummy_translation_clip(
    velocity: Tuple[float, float] = (1.0, 0.0),
    frames: int = 4,
    size: int = 16,
    seed: int = 7,
) -> Tuple[VideoClip, FlowFieldSequence]:
    """
    Create a toy clip under an integer viewport translation

    Returns:
        Tuple[VideoClip, FlowFieldSequence]: the clip and its exact flows
    """
    spec = MotionSpec(kind=MotionKind.TRANSLATE, velocity=velocity, background=BackgroundKind.WAVES)
    return make_toy_clip(spec, frames, size, size, seed=seed)


def create_dummy_static_clip(frames: int = 4, size: int = 16) -> VideoClip:
    clip, _ = make_toy_clip(MotionSpec(), frames, size, size, seed=3)
    return clip


def create_dummy_zero_flows(frames: int = 4, size: int = 16) -> FlowFieldSequence:
    zeros = np.zeros((frames - 1, size, size, 2), dtype=np.float32)
    return FlowFieldSequence(forward=zeros, backward=zeros.copy())


def create_dummy_random_frames(frames: int = 3, size: int = 16, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.2, 0.8, size=(frames, size, size, 3))
