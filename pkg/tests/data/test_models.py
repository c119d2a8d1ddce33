import numpy as np
import pytest
from pydantic import ValidationError

from dualprior.common.enums import MotionKind
from dualprior.data.models import DatasetConfig, DegradeConfig, FlowFieldSequence, MotionSpec, VideoClip


def test_video_clip_converts_integer_frames():
    clip = VideoClip(frames=np.zeros((2, 4, 4, 3), dtype=np.uint8))

    assert clip.frames.dtype == np.float32
    assert clip.frame_count == 2
    assert clip.shape == (2, 4, 4, 3)


@pytest.mark.parametrize(
    "frames",
    [
        np.zeros((4, 4, 3)),
        np.zeros((1, 4, 4, 3)),
        np.zeros((2, 4, 4, 1)),
        np.full((2, 4, 4, 3), 1.5),
        np.full((2, 4, 4, 3), np.nan),
    ],
)
def test_video_clip_rejects_invalid_frames(frames):
    with pytest.raises(ValidationError):
        VideoClip(frames=frames)


def test_flow_sequence_requires_matching_shapes():
    with pytest.raises(ValidationError):
        FlowFieldSequence(forward=np.zeros((2, 4, 4, 2)), backward=np.zeros((3, 4, 4, 2)))


def test_flow_sequence_bounds_displacements():
    forward = np.zeros((1, 4, 4, 2))
    forward[0, 0, 0, 0] = 5.0

    with pytest.raises(ValidationError):
        FlowFieldSequence(forward=forward, backward=np.zeros_like(forward))


def test_motion_spec_ignores_parameters_of_other_kinds():
    spec = MotionSpec(kind=MotionKind.ROTATE, velocity=(2.0, 1.0), angular_rate=0.1, scale_rate=0.05)

    assert spec.effective_velocity == (0.0, 0.0)
    assert spec.effective_angular_rate == 0.1
    assert spec.effective_scale == 1.0


def test_composite_motion_uses_every_parameter():
    spec = MotionSpec(kind=MotionKind.COMPOSITE, velocity=(2.0, 1.0), angular_rate=0.1, scale_rate=0.05)

    assert spec.effective_velocity == (2.0, 1.0)
    assert spec.effective_angular_rate == 0.1
    assert spec.effective_scale == pytest.approx(1.05)


def test_degrade_config_validation():
    with pytest.raises(ValidationError):
        DegradeConfig(blur_sigma_range=(2.0, 1.0))

    with pytest.raises(ValidationError):
        DegradeConfig(downscale_factors=[])

    with pytest.raises(ValidationError):
        DegradeConfig(jpeg_like_quality_range=(0, 50))

    with pytest.raises(ValidationError):
        DegradeConfig(noise_sigma_range=(0.0, 2.0))


def test_dataset_config_validation():
    with pytest.raises(ValidationError):
        DatasetConfig(frames=2)

    with pytest.raises(ValidationError):
        DatasetConfig(height=8)
