import numpy as np
import pytest

from dualprior.harness.reports import (
    history_frame,
    temporal_slice,
    temporal_slice_strip,
    write_loss_curves,
    write_metric_bars,
)
from dualprior.metrics.report import ClipMetrics, EvalReport
from tests.data.factories import create_dummy_translation_clip


def create_dummy_history():
    return [
        {"iteration": 0.0, "total": 2.0, "rec": 1.5, "adv_d": 0.7},
        {"iteration": 1.0, "total": 1.0, "rec": 0.5, "adv_d": 0.69},
    ]


def test_history_frame_is_indexed_by_iteration():
    _df = history_frame(create_dummy_history())

    assert list(_df.index) == [0, 1]
    assert list(_df.columns) == ["total", "rec", "adv_d"]
    assert _df.loc[1, "rec"] == 0.5


def test_write_loss_curves(tmp_path):
    path = write_loss_curves(create_dummy_history(), tmp_path / "reports" / "stage1_loss.png", title="stage1")

    assert path.is_file()
    assert path.stat().st_size > 0


def test_write_metric_bars(tmp_path):
    reports = [
        EvalReport(clips=[ClipMetrics(name="test_0000", psnr=p, ssim=0.5, ewarp=1.0)], label=label)
        for p, label in ((20.0, "lq"), (25.0, "both"))
    ]

    assert write_metric_bars(reports, tmp_path / "metrics.png").is_file()


def test_temporal_slice_stacks_one_row():
    clip, _ = create_dummy_translation_clip(frames=5, size=16)
    image = temporal_slice(clip, row=3)

    assert image.shape == (5, 16, 3)
    np.testing.assert_array_equal(image[2], clip.frames[2, 3])


def test_temporal_slice_defaults_to_middle_row():
    clip, _ = create_dummy_translation_clip()

    np.testing.assert_array_equal(temporal_slice(clip), clip.frames[:, 8])


def test_temporal_slice_row_out_of_range():
    clip, _ = create_dummy_translation_clip()

    with pytest.raises(IndexError):
        temporal_slice(clip, row=16)

    with pytest.raises(IndexError):
        temporal_slice(clip, row=-1)


def test_temporal_slice_strip(tmp_path):
    clip, _ = create_dummy_translation_clip()

    assert temporal_slice_strip([clip, clip], tmp_path / "strip.png").is_file()
