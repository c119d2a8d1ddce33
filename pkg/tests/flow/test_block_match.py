import numpy as np
import pytest

from dualprior.common.exceptions import ConfigurationError, ShapeError
from dualprior.flow.block_match import block_match_flow, candidate_displacements
from tests.data.factories import create_dummy_static_clip, create_dummy_translation_clip


def test_candidates_are_ordered_by_magnitude_then_lexicographically():
    candidates = candidate_displacements(1)

    assert candidates == [(0, 0), (-1, 0), (0, -1), (0, 1), (1, 0), (-1, -1), (-1, 1), (1, -1), (1, 1)]
    assert len(candidate_displacements(3)) == 49


def test_static_clip_has_zero_flow():
    clip = create_dummy_static_clip()

    flows = block_match_flow(clip, block=4, radius=2)

    assert flows.forward.shape == (3, 16, 16, 2)
    assert not flows.forward.any()
    assert not flows.backward.any()


def test_translation_is_recovered():
    clip, truth = create_dummy_translation_clip(velocity=(2.0, -1.0), size=32)

    flows = block_match_flow(clip, block=4, radius=3)

    interior = (slice(None), slice(4, -4), slice(4, -4))
    assert np.abs(flows.forward[interior] - truth.forward[interior]).mean() <= 0.5
    assert np.abs(flows.backward[interior] - truth.backward[interior]).mean() <= 0.5


def test_flows_are_block_constant_integers():
    clip, _ = create_dummy_translation_clip(velocity=(1.0, 1.0), size=32)

    flows = block_match_flow(clip, block=8, radius=2)

    assert np.array_equal(flows.forward, np.round(flows.forward))
    block = flows.forward[0, :8, :8]
    assert (block == block[0, 0]).all()


@pytest.mark.parametrize("block,radius", [(0, 0), (4, -1), (4, 5)])
def test_invalid_geometry(block, radius):
    with pytest.raises(ConfigurationError):
        block_match_flow(create_dummy_static_clip(), block=block, radius=radius)


def test_block_must_divide_frame():
    with pytest.raises(ShapeError) as e:
        block_match_flow(create_dummy_static_clip(), block=5, radius=2)

    assert e.value.dimension == "H"
