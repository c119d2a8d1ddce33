
import numpy as np
import pytest

from dualprior.common.constants import PSNR_CAP_DB
from dualprior.common.exceptions import ShapeError
from dualprior.data.models import FlowFieldSequence, VideoClip
from dualprior.metrics.quality import gaussian_window, psnr, ssim, warping_error
from tests.data.factories import (
    create_dummy_random_frames,
    create_dummy_translation_clip,
    create_dummy_zero_flows,
)


def test_psnr_of_constant_offset():
    frames = create_dummy_random_frames()

    assert psnr(frames + 0.1, frames) == pytest.approx(20.0, abs=1e-6)


def test_psnr_of_identical_clips_is_capped():
    frames = create_dummy_random_frames()

    assert psnr(frames, frames) == PSNR_CAP_DB


def test_psnr_averages_per_frame_values():
    frames = create_dummy_random_frames(frames=2)
    other = frames.copy()
    other[0] += 0.1
    other[1] += 0.01

    assert psnr(other, frames) == pytest.approx((20.0 + 40.0) / 2, abs=1e-6)


def test_psnr_accepts_clips():
    clip, _ = create_dummy_translation_clip()

    assert psnr(clip, VideoClip(frames=clip.frames.copy())) == PSNR_CAP_DB


def test_psnr_shape_mismatch():
    with pytest.raises(ShapeError):
        psnr(np.zeros((2, 4, 4, 3)), np.zeros((2, 4, 5, 3)))


def test_gaussian_window_is_normalized():
    window = gaussian_window()

    assert window.shape == (11,)
    assert window.sum() == pytest.approx(1.0)
    assert window.argmax() == 5


def test_ssim_identity():
    clip, _ = create_dummy_translation_clip()

    assert ssim(clip, clip) == pytest.approx(1.0, abs=1e-9)


def test_ssim_drops_with_noise():
    clip, _ = create_dummy_translation_clip()
    noise = np.random.default_rng(0).normal(scale=0.1, size=clip.frames.shape)
    noisy = np.clip(clip.frames + noise, 0.0, 1.0)

    assert ssim(noisy, clip) < 0.95


def test_ssim_needs_window_sized_frames():
    frames = np.zeros((2, 10, 16, 3))

    with pytest.raises(ShapeError) as e:
        ssim(frames, frames)

    assert e.value.dimension == "H"


def test_warping_error_of_consistent_clips():
    clip, flows = create_dummy_translation_clip()
    static = VideoClip(frames=np.repeat(clip.frames[:1], 4, axis=0))

    assert warping_error(clip, flows) <= 1e-6
    assert warping_error(static, create_dummy_zero_flows()) == 0.0


def test_warping_error_grows_with_flicker():
    clip, flows = create_dummy_translation_clip()
    signs = np.where(np.arange(4) % 2 == 0, 1.0, -1.0)[:, None, None, None]

    errors = [
        warping_error(np.clip(clip.frames * 0.8 + 0.1 + amplitude * signs, 0.0, 1.0), flows)
        for amplitude in (0.01, 0.05, 0.1)
    ]

    assert errors[0] < errors[1] < errors[2]
    # alternating +-a flicker is a 2a jump between every pair, x10^3
    assert errors[0] == pytest.approx(4e-4 * 1e3, rel=1e-3)


def test_warping_error_skips_pairs_without_valid_pixels():
    frames = create_dummy_random_frames(frames=2)
    flows = np.full((1, 16, 16, 2), 16.0)

    assert warping_error(frames, FlowFieldSequence(forward=flows, backward=-flows)) == 0.0


def test_warping_error_flow_count_mismatch():
    clip, _ = create_dummy_translation_clip()

    with pytest.raises(ShapeError):
        warping_error(clip, create_dummy_zero_flows(frames=3))
