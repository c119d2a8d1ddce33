import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd
from pandas import DataFrame
from pydantic import validator

from ..common.models import ValidateBaseModel
from ..data.models import FlowFieldSequence, VideoClip
from .quality import psnr, ssim, warping_error

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

METRIC_NAMES = ("psnr", "ssim", "ewarp")


class ClipMetrics(ValidateBaseModel):
    """
    Metrics of one restored clip.

    Attributes:
        name (str): The clip name.
        psnr (float): PSNR against the HQ reference in dB.
        ssim (float): SSIM against the HQ reference.
        ewarp (float): Warping error under the reference flows, x10^3.
    """

    name: str
    psnr: float
    ssim: float
    ewarp: float

    @validator("psnr", "ssim", "ewarp")
    def is_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("metric values must be finite")
        return v

    @validator("ssim")
    def ssim_in_range(cls, v: float) -> float:
        if not -1.0 <= v <= 1.0:
            raise ValueError(f"ssim must lie within [-1, 1], got {v}")
        return v


class EvalReport(ValidateBaseModel):
    """
    Per-clip metrics plus their aggregate. Aggregates are always recomputed from the rows.

    Attributes:
        clips (List[ClipMetrics]): One row per evaluated clip.
        label (str): Name of the evaluated configuration, ie "both" or "bypass".
        config_hash (Optional[str]): Hash of the RunConfig the restorer was trained under.
    """

    clips: List[ClipMetrics]
    label: str = "eval"
    config_hash: Optional[str] = None

    @property
    def aggregate(self) -> Dict[str, float]:
        if not self.clips:
            return {name: float("nan") for name in METRIC_NAMES}
        return {
            name: math.fsum(getattr(row, name) for row in self.clips) / len(self.clips)
            for name in METRIC_NAMES
        }

    @property
    def psnr(self) -> float:
        return self.aggregate["psnr"]

    @property
    def ssim(self) -> float:
        return self.aggregate["ssim"]

    @property
    def ewarp(self) -> float:
        return self.aggregate["ewarp"]

    @property
    def df(self) -> DataFrame:
        """Returns the per-clip metrics as a pandas dataframe indexed by clip name.

        Returns:
            DataFrame: one row per clip with psnr, ssim and ewarp columns
        """
        if not self.clips:
            return pd.DataFrame(columns=list(METRIC_NAMES))

        _df = pd.DataFrame([row.dict() for row in self.clips])
        _df.set_index("name", inplace=True)

        return _df

    def summary(self) -> dict:
        return {
            "label": self.label,
            "config_hash": self.config_hash,
            "clips": len(self.clips),
            **self.aggregate,
        }

    def write(self, directory: PathLike) -> Path:
        """Writes `<label>_clips.jsonl` (one row per clip) and `<label>_summary.json` into directory.

        Returns:
            Path: The summary file
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)

        rows_path = directory / f"{self.label}_clips.jsonl"
        rows_path.write_text("".join(row.json() + "\n" for row in self.clips))

        summary_path = directory / f"{self.label}_summary.json"
        summary_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True))

        log.info(
            f"{self.label}: psnr={self.psnr:.3f} dB ssim={self.ssim:.4f} ewarp={self.ewarp:.4f} "
            f"over {len(self.clips)} clips, written to {directory}"
        )

        return summary_path

    @classmethod
    def read(cls, directory: PathLike, label: str) -> "EvalReport":
        directory = Path(directory)
        summary = json.loads((directory / f"{label}_summary.json").read_text())
        lines = (directory / f"{label}_clips.jsonl").read_text().splitlines()

        return cls(
            clips=[ClipMetrics.parse_raw(line) for line in lines if line.strip()],
            label=label,
            config_hash=summary.get("config_hash"),
        )


def evaluate_clip(
    restored: VideoClip, reference: VideoClip, flows: FlowFieldSequence, name: Optional[str] = None
) -> ClipMetrics:
    """Scores a restored clip against its HQ reference and the reference's flows"""
    return ClipMetrics(
        name=name or reference.name or "clip",
        psnr=psnr(restored, reference),
        ssim=ssim(restored, reference),
        ewarp=warping_error(restored, flows),
    )
