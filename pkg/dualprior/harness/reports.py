import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from ..data.models import VideoClip  # noqa: E402
from ..metrics.report import METRIC_NAMES, EvalReport  # noqa: E402

log = logging.getLogger(__name__)

PathLike = Union[str, Path]


def history_frame(history: List[Dict[str, float]]) -> pd.DataFrame:
    """Training history rows as a dataframe indexed by iteration"""
    _df = pd.DataFrame(history)
    if "iteration" in _df.columns:
        _df["iteration"] = _df["iteration"].astype(int)
        _df.set_index("iteration", inplace=True)
    return _df


def write_loss_curves(history: List[Dict[str, float]], path: PathLike, title: Optional[str] = None) -> Path:
    """Plots every recorded loss term against the iteration, one panel for the total and one for the terms.

    Args:
        history (List[Dict[str, float]]): Train state history rows.
        path (PathLike): Output PNG.
        title (Optional[str]): Figure title, ie the stage name.

    Returns:
        Path: The written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _df = history_frame(history)

    fig, (ax_total, ax_terms) = plt.subplots(1, 2, figsize=(10, 4))
    if "total" in _df.columns:
        ax_total.plot(_df.index, _df["total"], color="black")
    ax_total.set_xlabel("iteration")
    ax_total.set_ylabel("total loss")

    for column in _df.columns:
        if column != "total":
            ax_terms.plot(_df.index, _df[column], label=column)
    ax_terms.set_xlabel("iteration")
    ax_terms.set_yscale("symlog", linthresh=1e-3)
    if len(_df.columns) > 1:
        ax_terms.legend(fontsize="small")

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)

    log.info(f"wrote loss curves to {path}")

    return path


def write_metric_bars(reports: Sequence[EvalReport], path: PathLike) -> Path:
    """Per-clip bars of psnr, ssim and ewarp, one bar group per clip and one color per report"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fig, axes = plt.subplots(1, len(METRIC_NAMES), figsize=(4 * len(METRIC_NAMES), 4))
    width = 0.8 / max(len(reports), 1)

    for offset, report in enumerate(reports):
        _df = report.df
        positions = np.arange(len(_df)) + offset * width
        for ax, metric in zip(axes, METRIC_NAMES):
            ax.bar(positions, _df[metric].to_numpy(), width=width, label=report.label)
            ax.set_xticks(np.arange(len(_df)) + 0.4 - width / 2)
            ax.set_xticklabels(list(_df.index), rotation=45, ha="right", fontsize="small")
            ax.set_title(metric)

    if reports:
        axes[0].legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)

    return path


def temporal_slice(clip: VideoClip, row: Optional[int] = None) -> np.ndarray:
    """One image row stacked across frames, a (T, W, 3) image. Flicker shows up as horizontal streaks.

    Args:
        clip (VideoClip): The clip.
        row (Optional[int]): The image row. Defaults to the middle row.

    Raises:
        IndexError: If row lies outside the frame.
    """
    height = clip.frames.shape[1]
    row = height // 2 if row is None else row
    if not 0 <= row < height:
        raise IndexError(f"row {row} outside a frame of height {height}")
    return np.ascontiguousarray(clip.frames[:, row, :, :])


def temporal_slice_strip(clips: Sequence[VideoClip], path: PathLike, row: Optional[int] = None) -> Path:
    """Writes the temporal slices of several clips side by side (ie LQ, restored, HQ) as one PNG"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    slices = [temporal_slice(clip, row) for clip in clips]
    gap = np.ones((slices[0].shape[0], 2, 3), dtype=np.float32)
    parts = []
    for index, image in enumerate(slices):
        if index:
            parts.append(gap)
        parts.append(image.astype(np.float32))

    plt.imsave(path, np.clip(np.concatenate(parts, axis=1), 0.0, 1.0))

    return path
