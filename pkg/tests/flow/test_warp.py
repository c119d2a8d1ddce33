import numpy as np
import pytest
import torch

from dualprior.common.exceptions import ShapeError
from dualprior.flow.warp import warp, warp_array


def test_zero_flow_is_identity(generator):
    frames = torch.rand(2, 5, 6, 3, generator=generator)

    warped, mask = warp(frames, torch.zeros(2, 5, 6, 2))

    assert torch.allclose(warped, frames, atol=1e-6)
    assert bool(mask.all())


def test_integer_shift_samples_the_neighbor():
    frame = np.arange(4 * 5 * 1, dtype=np.float64).reshape(4, 5, 1)
    flow = np.zeros((4, 5, 2))
    flow[..., 0] = 1.0

    warped, mask = warp_array(frame, flow)

    np.testing.assert_allclose(warped[:, :-1], frame[:, 1:], atol=1e-9)
    assert mask[:, :-1].all()
    assert not mask[:, -1].any()
    # out-of-frame samples replicate the border
    np.testing.assert_allclose(warped[:, -1], frame[:, -1], atol=1e-9)


def test_fractional_shift_interpolates_bilinearly():
    frame = np.tile(np.arange(4, dtype=np.float64), (3, 1))[..., None]
    flow = np.zeros((3, 4, 2))
    flow[..., 0] = 0.25

    warped, _ = warp_array(frame, flow)

    np.testing.assert_allclose(warped[:, :3, 0], frame[:, :3, 0] + 0.25, atol=1e-9)


def test_warp_keeps_dtype():
    warped, mask = warp(torch.zeros(3, 3, 2, dtype=torch.float32), torch.zeros(3, 3, 2))

    assert warped.dtype == torch.float32
    assert mask.dtype == torch.bool
    assert mask.shape == (3, 3)


def test_warp_shape_errors():
    with pytest.raises(ShapeError):
        warp(torch.zeros(4, 4, 3), torch.zeros(4, 4, 3))

    with pytest.raises(ShapeError) as e:
        warp(torch.zeros(4, 4, 3), torch.zeros(4, 5, 2))

    assert e.value.dimension == "W"
