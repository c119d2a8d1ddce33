import numpy as np
import pytest

from dualprior.common.enums import MotionKind
from dualprior.common.exceptions import ConfigurationError
from dualprior.data.models import MotionSpec
from dualprior.data.synthesis import analytic_flows, make_toy_clip, random_motion
from dualprior.flow.warp import warp_array

from tests.data.factories import create_dummy_static_clip, create_dummy_translation_clip


def test_integer_translation_has_exact_flows():
    clip, flows = create_dummy_translation_clip(velocity=(1.0, -1.0))

    assert clip.shape == (4, 16, 16, 3)
    assert flows.pair_count == 3
    assert np.all(flows.forward[..., 0] == 1.0)
    assert np.all(flows.forward[..., 1] == -1.0)
    assert np.all(flows.backward == -flows.forward)


def test_forward_flow_warps_each_frame_onto_the_next():
    clip, flows = create_dummy_translation_clip(velocity=(2.0, 1.0), size=32)

    for i in range(clip.frame_count - 1):
        warped, mask = warp_array(clip.frames[i], flows.forward[i])
        np.testing.assert_allclose(warped[mask], clip.frames[i + 1][mask], atol=1e-5)


def test_static_clip_repeats_its_first_frame():
    clip = create_dummy_static_clip()

    assert all(np.array_equal(frame, clip.frames[0]) for frame in clip.frames)


@pytest.mark.parametrize(
    "spec",
    [
        MotionSpec(kind=MotionKind.ROTATE, angular_rate=0.05),
        MotionSpec(kind=MotionKind.SCALE, scale_rate=0.02),
        MotionSpec(kind=MotionKind.COMPOSITE, velocity=(1.0, 0.0), angular_rate=0.02, scale_rate=0.01),
    ],
)
def test_forward_and_backward_flows_compose_to_identity(spec):
    flows = analytic_flows(spec, 3, 32, 32)

    # backward[i] evaluated at p + forward[i](p) undoes forward[i]; check at the image center
    # where both maps are smooth and in frame
    for i in range(flows.pair_count):
        forward = flows.forward[i, 16, 16]
        x, y = 16 + forward[0], 16 + forward[1]
        x0, y0 = int(np.floor(x)), int(np.floor(y))
        ax, ay = x - x0, y - y0
        b = flows.backward[i]
        backward = (
            (1 - ax) * (1 - ay) * b[y0, x0]
            + ax * (1 - ay) * b[y0, x0 + 1]
            + (1 - ax) * ay * b[y0 + 1, x0]
            + ax * ay * b[y0 + 1, x0 + 1]
        )
        np.testing.assert_allclose(forward + backward, 0.0, atol=1e-3)


def test_clip_is_deterministic_in_seed_and_index():
    spec = MotionSpec(kind=MotionKind.TRANSLATE, velocity=(1.0, 0.0))

    a, _ = make_toy_clip(spec, 3, 16, 16, seed=1, index=2)
    b, _ = make_toy_clip(spec, 3, 16, 16, seed=1, index=2)
    c, _ = make_toy_clip(spec, 3, 16, 16, seed=1, index=3)

    assert np.array_equal(a.frames, b.frames)
    assert not np.array_equal(a.frames, c.frames)


def test_clip_values_in_unit_range():
    clip, _ = make_toy_clip(MotionSpec(kind=MotionKind.ROTATE, angular_rate=0.05), 4, 32, 32, seed=0)

    assert clip.frames.min() >= 0.0
    assert clip.frames.max() <= 1.0


def test_clip_size_limits():
    with pytest.raises(ConfigurationError):
        make_toy_clip(MotionSpec(), 2, 16, 16, seed=0)

    with pytest.raises(ConfigurationError):
        make_toy_clip(MotionSpec(), 3, 8, 16, seed=0)


def test_displacement_bound():
    too_fast = MotionSpec(kind=MotionKind.TRANSLATE, velocity=(5.0, 0.0))

    with pytest.raises(ConfigurationError) as e:
        make_toy_clip(too_fast, 3, 16, 16, seed=0)

    assert e.value.context["bound"] == 4.0

    # exactly H/4 is allowed
    make_toy_clip(MotionSpec(kind=MotionKind.TRANSLATE, velocity=(4.0, 0.0)), 3, 16, 16, seed=0)


def test_random_motion_cycles_kinds_with_integer_velocities():
    kinds = [random_motion(0, index, max_speed=2, height=32).kind for index in range(4)]
    assert kinds == [MotionKind.TRANSLATE, MotionKind.ROTATE, MotionKind.SCALE, MotionKind.COMPOSITE]

    velocity = random_motion(0, 0, max_speed=2, height=32).velocity
    assert all(float(v).is_integer() and abs(v) <= 2 for v in velocity)
