from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import Field, root_validator, validator

from ..common.enums import BackgroundKind, MotionKind, Split
from ..common.models import ArrayModel, ValidateBaseModel


class VideoClip(ArrayModel):
    """A sequence of RGB frames, the unit of restoration.

    Attributes:
        frames (np.ndarray): T x H x W x C float array with values in [0, 1].
        name (Optional[str]): Identifier of the clip, if any.
        degradation (Optional[DegradationLog]): The sampled degradation parameters when the clip is an LQ counterpart.
    """

    frames: np.ndarray
    name: Optional[str] = None
    degradation: Optional["DegradationLog"] = None

    @validator("frames", pre=True)
    def frames_are_valid_video(cls, v: np.ndarray) -> np.ndarray:
        """Validates rank, frame count, channel count and value range

        Args:
            v (np.ndarray): The frames field's value

        Raises:
            ValueError: If the array is not a valid T x H x W x 3 clip in [0, 1]

        Returns:
            np.ndarray: The frames, converted to a floating dtype if needed
        """
        v = np.asarray(v)
        if v.ndim != 4:
            raise ValueError(f"frames must be T x H x W x C, got shape {v.shape}")
        if v.shape[0] < 2:
            raise ValueError(f"a clip needs at least 2 frames, got {v.shape[0]}")
        if v.shape[-1] != 3:
            raise ValueError(f"frames must have 3 channels, got {v.shape[-1]}")
        if not np.issubdtype(v.dtype, np.floating):
            v = v.astype(np.float32)
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("frame values must lie within [0, 1]")

        return v

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return tuple(self.frames.shape)


class FlowFieldSequence(ArrayModel):
    """Forward and backward per-pixel displacements between consecutive frames.

    With backward warping, warp(frame_i, forward[i]) reproduces frame_{i+1} and warp(frame_{i+1}, backward[i])
    reproduces frame_i.

    Attributes:
        forward (np.ndarray): (T-1) x H x W x 2 displacements in pixels, ordered (dx, dy).
        backward (np.ndarray): (T-1) x H x W x 2 displacements in pixels, ordered (dx, dy).
    """

    forward: np.ndarray
    backward: np.ndarray

    @root_validator(skip_on_failure=True)
    def flows_are_consistent(cls, values: dict) -> dict:
        forward, backward = np.asarray(values["forward"]), np.asarray(values["backward"])

        if forward.shape != backward.shape:
            raise ValueError(
                f"forward {forward.shape} and backward {backward.shape} flows differ in shape"
            )
        if forward.ndim != 4 or forward.shape[-1] != 2:
            raise ValueError(f"flows must be (T-1) x H x W x 2, got {forward.shape}")

        bound = max(forward.shape[1], forward.shape[2])
        for flow in (forward, backward):
            if not np.all(np.isfinite(flow)):
                raise ValueError("flows must be finite")
            if np.abs(flow).max(initial=0.0) > bound:
                raise ValueError(f"flow displacement exceeds max(H, W) = {bound}")

        values["forward"], values["backward"] = forward, backward

        return values

    @property
    def pair_count(self) -> int:
        return self.forward.shape[0]


class MotionSpec(ValidateBaseModel):
    """Analytic viewport motion of a toy clip.

    Frame i samples canonical content at G_i(p) = s^i R(i * angular_rate) (p - center) + center + i * velocity, with
    s = 1 + scale_rate. Only the parameters used by `kind` are applied.

    Attributes:
        kind (MotionKind): Motion family.
        velocity (Tuple[float, float]): Viewport translation (dx, dy) in px/frame.
        angular_rate (float): Rotation about the center in rad/frame.
        scale_rate (float): Relative zoom per frame.
        center (Optional[Tuple[float, float]]): Rotation/scale center (x, y) in pixels, defaults to the image center.
        background (BackgroundKind): Background texture.
    """

    kind: MotionKind = MotionKind.STATIC
    velocity: Tuple[float, float] = (0.0, 0.0)
    angular_rate: float = 0.0
    scale_rate: float = 0.0
    center: Optional[Tuple[float, float]] = None
    background: BackgroundKind = BackgroundKind.WAVES

    @validator("scale_rate")
    def scale_keeps_orientation(cls, v: float) -> float:
        if v <= -1.0:
            raise ValueError("scale_rate must be greater than -1")
        return v

    @property
    def effective_velocity(self) -> Tuple[float, float]:
        if self.kind in (MotionKind.TRANSLATE, MotionKind.COMPOSITE):
            return self.velocity
        return (0.0, 0.0)

    @property
    def effective_angular_rate(self) -> float:
        if self.kind in (MotionKind.ROTATE, MotionKind.COMPOSITE):
            return self.angular_rate
        return 0.0

    @property
    def effective_scale(self) -> float:
        if self.kind in (MotionKind.SCALE, MotionKind.COMPOSITE):
            return 1.0 + self.scale_rate
        return 1.0


class DegradeConfig(ValidateBaseModel):
    """Parameter ranges of the degradation pipeline blur -> downscale -> noise -> compression -> upscale.

    Attributes:
        blur_sigma_range (Tuple[float, float]): Gaussian blur sigma range in pixels.
        noise_sigma_range (Tuple[float, float]): Additive Gaussian noise sigma range in [0, 1] intensity units.
        downscale_factors (List[int]): Candidate integer downscale factors.
        jpeg_like_quality_range (Tuple[int, int]): Compression surrogate quality range in [1, 100]. 100 is lossless.
        seed (int): 64-bit seed of the degradation streams.
    """

    blur_sigma_range: Tuple[float, float] = (0.5, 2.0)
    noise_sigma_range: Tuple[float, float] = (0.0, 0.05)
    downscale_factors: List[int] = Field(default_factory=lambda: [2, 4])
    jpeg_like_quality_range: Tuple[int, int] = (40, 90)
    seed: int = 0

    @validator("blur_sigma_range", "noise_sigma_range")
    def range_is_ordered_and_non_negative(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = v
        if lo > hi:
            raise ValueError(f"range lower bound {lo} exceeds upper bound {hi}")
        if lo < 0:
            raise ValueError("range bounds must be non-negative")
        return v

    @validator("noise_sigma_range")
    def noise_is_intensity_scaled(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if v[1] > 1.0:
            raise ValueError("noise sigma is in [0, 1] intensity units")
        return v

    @validator("downscale_factors")
    def factors_are_positive(cls, v: List[int]) -> List[int]:
        if len(v) == 0:
            raise ValueError("downscale_factors must not be empty")
        if any(factor < 1 for factor in v):
            raise ValueError("downscale factors must be positive integers")
        return v

    @validator("jpeg_like_quality_range")
    def quality_in_range(cls, v: Tuple[int, int]) -> Tuple[int, int]:
        lo, hi = v
        if lo > hi:
            raise ValueError(f"quality lower bound {lo} exceeds upper bound {hi}")
        if lo < 1 or hi > 100:
            raise ValueError("quality must lie within [1, 100]")
        return v

    @validator("seed")
    def seed_fits_64_bits(cls, v: int) -> int:
        if not 0 <= v < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        return v

    @classmethod
    def identity(cls, seed: int = 0) -> "DegradeConfig":
        """A pipeline that returns its input unchanged"""
        return cls(
            blur_sigma_range=(0.0, 0.0),
            noise_sigma_range=(0.0, 0.0),
            downscale_factors=[1],
            jpeg_like_quality_range=(100, 100),
            seed=seed,
        )


class DegradationLog(ValidateBaseModel):
    """The parameters sampled by one degradation call.

    Attributes:
        clip_index (int): Stream index the parameters were drawn from.
        seed (int): The DegradeConfig seed.
        blur_sigma (float): Sampled blur sigma.
        downscale_factor (int): Sampled downscale factor.
        noise_sigma (float): Sampled noise sigma.
        quality (int): Sampled compression surrogate quality.
        psnr_db (Optional[float]): PSNR of the degraded clip against its source.
    """

    clip_index: int
    seed: int
    blur_sigma: float
    downscale_factor: int
    noise_sigma: float
    quality: int
    psnr_db: Optional[float] = None


VideoClip.update_forward_refs()


class DatasetConfig(ValidateBaseModel):
    """Shape and content of a generated toy dataset.

    Attributes:
        num_train (int): Number of training items.
        num_test (int): Number of test items.
        frames (int): Frames per clip, at least 3.
        height (int): Frame height, at least 16.
        width (int): Frame width, at least 16.
        seed (int): Seed of the content and motion streams.
        max_speed (int): Largest integer translation speed in px/frame.
        degradation (DegradeConfig): The degradation pipeline for LQ counterparts.
        workers (int): Threads used for generation.
    """

    num_train: int = 8
    num_test: int = 4
    frames: int = 8
    height: int = 64
    width: int = 64
    seed: int = 0
    max_speed: int = 2
    degradation: DegradeConfig = Field(default_factory=DegradeConfig)
    workers: int = 1

    @validator("frames")
    def enough_frames(cls, v: int) -> int:
        if v < 3:
            raise ValueError("clips need at least 3 frames")
        return v

    @validator("height", "width")
    def large_enough(cls, v: int) -> int:
        if v < 16:
            raise ValueError("frames must be at least 16 pixels on each side")
        return v

    @validator("num_train", "num_test", "workers")
    def non_negative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("counts must be non-negative")
        return v


class DatasetItem(ArrayModel):
    """One paired training or test sample.

    Attributes:
        hq (VideoClip): The clean clip.
        lq (VideoClip): Its degraded counterpart.
        flows (FlowFieldSequence): Analytic ground-truth flows of hq.
        motion (MotionSpec): The motion that produced hq.
        split (Split): Which split the item belongs to.
    """

    hq: VideoClip
    lq: VideoClip
    flows: FlowFieldSequence
    motion: MotionSpec
    split: Split = Split.TRAIN

    @property
    def name(self) -> str:
        return self.hq.name or "clip"


class ToyDataset(ArrayModel):
    """An in-memory collection of DatasetItems."""

    items: List[DatasetItem]
    config: Optional[DatasetConfig] = None

    def split(self, split: Split) -> List[DatasetItem]:
        return [item for item in self.items if item.split == split]

    @property
    def train(self) -> List[DatasetItem]:
        return self.split(Split.TRAIN)

    @property
    def test(self) -> List[DatasetItem]:
        return self.split(Split.TEST)

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, index: int) -> DatasetItem:
        return self.items[index]


class FileRecord(ValidateBaseModel):
    path: str
    sha256: str
    shape: List[int]


class ClipRecord(ValidateBaseModel):
    """Manifest entry of one dataset item"""

    name: str
    split: Split
    shape: List[int]
    motion: MotionSpec
    degradation: Optional[DegradationLog] = None
    files: Dict[str, FileRecord]


class DatasetManifest(ValidateBaseModel):
    version: int
    config: Optional[DatasetConfig] = None
    clips: List[ClipRecord]
