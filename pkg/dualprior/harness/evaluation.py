import logging
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

import pandas as pd
from pandas import DataFrame

from ..common.checkpoint import Checkpoint, load_module_state
from ..common.enums import FusionVariant, PriorMode, Split, Stage
from ..data.dataset import load_dataset
from ..data.models import ToyDataset
from ..metrics.report import METRIC_NAMES, EvalReport, evaluate_clip
from ..prior.network import StdcModel
from ..restore.pipeline import Restorer, one_step_restore
from .config import RunConfig
from .reports import write_metric_bars
from .training import train_stage0, train_stage1, train_stage1p, train_stage2

log = logging.getLogger(__name__)

PathLike = Union[str, Path]


def load_stdc(config: RunConfig, path: Optional[PathLike] = None, allow_mismatch: bool = False) -> StdcModel:
    """Loads the Stage-1' prior extractor.

    Args:
        config (RunConfig): The run configuration.
        path (Optional[PathLike]): Checkpoint file. Defaults to the Stage-1' checkpoint under config.output_dir.
        allow_mismatch (bool): Skip the base config hash check. Defaults to False.

    Raises:
        DatasetNotFoundError: If the checkpoint is missing.
        ConfigHashMismatchError: If it was trained under another configuration.
    """
    path = path or config.checkpoint_path(Stage.STAGE1P)
    checkpoint = Checkpoint.load(path, kind="stdc", config_hash=None if allow_mismatch else config.base_hash)

    model = StdcModel(config.prior)
    load_module_state(model, checkpoint.state["stdc"])
    model.eval()

    return model


def load_restorer(config: RunConfig, path: Optional[PathLike] = None, allow_mismatch: bool = False) -> Restorer:
    """Loads a Stage-2 restorer, checking its hash against the full config hash.

    Raises:
        DatasetNotFoundError: If the checkpoint is missing.
        ConfigHashMismatchError: If it was trained under another configuration.
    """
    path = path or config.checkpoint_path(Stage.STAGE2)
    checkpoint = Checkpoint.load(path, kind="restorer", config_hash=None if allow_mismatch else config.config_hash)

    model = Restorer(config.restorer, config.prior)
    load_module_state(model, checkpoint.state["restorer"])
    model.eval()

    log.debug(f"loaded restorer from {path}: t*={checkpoint.meta.get('t_star')}, priors={checkpoint.meta.get('prior_mode')}")

    return model


def evaluate(
    config: RunConfig,
    dataset: ToyDataset,
    restorer: Optional[Restorer] = None,
    stdc: Optional[StdcModel] = None,
    bypass: bool = False,
    hq_input: bool = False,
    label: Optional[str] = None,
    split: Split = Split.TEST,
) -> EvalReport:
    """Restores every clip of a split and scores it against its HQ reference and analytic flows.

    Args:
        config (RunConfig): The run configuration, whose hash is recorded in the report.
        dataset (ToyDataset): The dataset.
        restorer (Optional[Restorer]): The trained restorer. Required unless bypass is set.
        stdc (Optional[StdcModel]): The prior extractor. Required when the restorer uses priors.
        bypass (bool): Score the inputs themselves instead of restoring them. Defaults to False.
        hq_input (bool): Feed the HQ clips instead of the LQ ones. Defaults to False.
        label (Optional[str]): Report label. Defaults to "bypass" or config.run_label.
        split (Split): The split to evaluate. Defaults to the test split.

    Raises:
        ValueError: If no restorer is given without bypass.

    Returns:
        EvalReport: Per-clip rows and their aggregate
    """
    if restorer is None and not bypass:
        raise ValueError("evaluate needs a restorer unless bypass is set")

    rows = []
    for item in dataset.split(split):
        source = item.hq if hq_input else item.lq
        restored = source if bypass else one_step_restore(source, restorer, stdc)
        rows.append(evaluate_clip(restored, item.hq, item.flows, name=item.name))

    report = EvalReport(
        clips=rows,
        label=label or ("bypass" if bypass else config.run_label),
        config_hash=config.config_hash,
    )
    log.info(f"{report.label}: psnr={report.psnr:.3f} dB ssim={report.ssim:.4f} ewarp={report.ewarp:.4f}")

    return report


def evaluate_checkpoints(
    config: RunConfig, dataset: Optional[ToyDataset] = None, allow_mismatch: bool = False
) -> EvalReport:
    """Evaluates the saved restorer of config and writes its report and metric plot under config.output_dir.

    The LQ inputs are scored as well, as the "lq" baseline report.

    Raises:
        DatasetNotFoundError: If the dataset or a checkpoint is missing.
        ConfigHashMismatchError: If a checkpoint does not match config, unless allow_mismatch is set.
    """
    dataset = dataset if dataset is not None else load_dataset(config.dataset_path)

    restorer = load_restorer(config, allow_mismatch=allow_mismatch)
    stdc = load_stdc(config, allow_mismatch=allow_mismatch) if restorer.fusion is not None else None

    report = evaluate(config, dataset, restorer, stdc)
    baseline = evaluate(config, dataset, bypass=True, label="lq")

    report.write(config.reports_path)
    baseline.write(config.reports_path)
    write_metric_bars([baseline, report], config.reports_path / f"{report.label}_metrics.png")

    return report


class AblationKey(NamedTuple):
    """One cell of an ablation grid"""

    mode: PriorMode
    variant: FusionVariant
    seed: int


def train_upstream(config: RunConfig, dataset: ToyDataset) -> None:
    """Trains Stages 0, 1 and 1' of config, skipping every stage whose checkpoint already exists"""
    for stage, train_stage in (
        (Stage.STAGE0, train_stage0),
        (Stage.STAGE1, train_stage1),
        (Stage.STAGE1P, train_stage1p),
    ):
        if config.checkpoint_path(stage).is_file():
            log.info(f"reusing {config.checkpoint_path(stage)}")
            continue
        train_stage(config, dataset=dataset)


def ablation_runs(
    config: RunConfig,
    modes: Iterable[PriorMode],
    variants: Optional[Iterable[FusionVariant]] = None,
    seeds: Optional[Iterable[int]] = None,
) -> List[Tuple[AblationKey, RunConfig]]:
    """Expands an ablation grid into one config per cell.

    Fusion variants only apply to the both-priors mode; the single-prior modes keep the variant of config.
    Without seeds the grid has one seed, config.seed, and keeps config.output_dir.
    """
    variants = [FusionVariant(v) for v in variants] if variants else [config.restorer.fusion.variant]
    seeded = [(config.seed, config)] if seeds is None else [(seed, config.with_seed(seed)) for seed in seeds]

    runs = []
    for seed, base in seeded:
        for mode in modes:
            mode = PriorMode(mode)
            for variant in variants if mode == PriorMode.BOTH else [base.restorer.fusion.variant]:
                runs.append((AblationKey(mode, variant, seed), base.with_prior_mode(mode, variant)))

    return runs


def ablation_frame(reports: Dict[AblationKey, EvalReport]) -> DataFrame:
    """Returns the aggregate metrics of an ablation as a pandas dataframe.

    Returns:
        DataFrame: one row per (mode, variant, seed) with psnr, ssim and ewarp columns
    """
    if not reports:
        return pd.DataFrame(columns=[*AblationKey._fields, *METRIC_NAMES])

    _df = pd.DataFrame(
        [
            {"mode": key.mode.value, "variant": key.variant.value, "seed": key.seed, **report.aggregate}
            for key, report in reports.items()
        ]
    )
    _df.set_index(list(AblationKey._fields), inplace=True)

    return _df


def run_ablation(
    config: RunConfig,
    modes: Iterable[PriorMode] = tuple(PriorMode),
    dataset: Optional[ToyDataset] = None,
    train: bool = False,
    variants: Optional[Iterable[FusionVariant]] = None,
    seeds: Optional[Iterable[int]] = None,
) -> Dict[AblationKey, EvalReport]:
    """One report per (prior mode, fusion variant, seed) cell.

    Without seeds every cell shares the upstream checkpoints of config. With seeds, each seed is a separate run
    under `output_dir/seed_<seed>` that shares only the dataset; its upstream stages are trained when train is set
    and their checkpoints are missing.

    Args:
        config (RunConfig): The base configuration.
        modes (Iterable[PriorMode]): Modes to compare. Defaults to all four.
        dataset (Optional[ToyDataset]): The dataset. Defaults to the one under config.output_dir.
        train (bool): Train Stage 2 for every cell first. Defaults to False.
        variants (Optional[Iterable[FusionVariant]]): Fusion variants of the both-priors mode. Defaults to the
            variant of config.
        seeds (Optional[Iterable[int]]): Seeds to repeat the grid for. Defaults to config.seed alone.

    Raises:
        DatasetNotFoundError: If the dataset or a checkpoint is missing.

    Returns:
        Dict[AblationKey, EvalReport]: Reports by cell
    """
    dataset = dataset if dataset is not None else load_dataset(config.dataset_path)
    runs = ablation_runs(config, list(modes), variants, seeds)

    if train and seeds is not None:
        for seed in dict.fromkeys(key.seed for key, _ in runs):
            train_upstream(config.with_seed(seed), dataset)

    reports = {}
    for key, run in runs:
        if train:
            train_stage2(run, dataset=dataset)
        reports[key] = evaluate_checkpoints(run, dataset)

    for seed in dict.fromkeys(key.seed for key in reports):
        reports_path = (config if seeds is None else config.with_seed(seed)).reports_path
        write_metric_bars(
            [report for key, report in reports.items() if key.seed == seed], reports_path / "ablation_metrics.png"
        )

    _df = ablation_frame(reports)
    config.reports_path.mkdir(parents=True, exist_ok=True)
    _df.to_csv(config.reports_path / "ablation.csv")
    log.info(f"ablation over {len(reports)} runs:\n{_df.to_string()}")

    return reports
