import hashlib
import json
from pathlib import Path
from typing import Tuple, Union

from pydantic import Field, root_validator, validator

from ..common.constants import DEFAULT_STAGE1_LR, DEFAULT_STAGE2_LR
from ..common.enums import FusionVariant, PriorMode, Stage
from ..common.exceptions import ConfigurationError, DatasetNotFoundError
from ..common.models import ValidateBaseModel
from ..data.models import DatasetConfig, DegradeConfig
from ..fusion.models import FusionConfig
from ..losses.models import LossWeights
from ..prior.models import PriorConfig
from ..restore.models import RestorerConfig

PathLike = Union[str, Path]


class StageSchedule(ValidateBaseModel):
    """
    Optimization schedule of one training stage.

    Attributes:
        iterations (int): Optimizer steps.
        learning_rate (float): AdamW learning rate.
        batch_size (int): Clips per step, without gradient accumulation.
        weight_decay (float): Decoupled weight decay.
        betas (Tuple[float, float]): AdamW moment coefficients.
        grad_clip (float): Global gradient norm bound, 0 disables clipping.
        log_every (int): Iterations between progress log lines.
        checkpoint_every (int): Iterations between train state saves during a run, 0 saves only at the end.
    """

    iterations: int
    learning_rate: float
    batch_size: int = 2
    weight_decay: float = 0.01
    betas: Tuple[float, float] = (0.9, 0.95)
    grad_clip: float = 1.0
    log_every: int = 100
    checkpoint_every: int = 500

    @validator("iterations", "batch_size", "log_every")
    def positive_count(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("iteration counts and batch sizes must be positive")
        return v

    @validator("learning_rate")
    def positive_rate(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("learning rates must be positive")
        return v

    @validator("weight_decay", "grad_clip", "checkpoint_every")
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("must be non-negative")
        return v


class Schedules(ValidateBaseModel):
    stage0: StageSchedule = Field(default_factory=lambda: StageSchedule(iterations=2000, learning_rate=2e-4))
    stage1: StageSchedule = Field(
        default_factory=lambda: StageSchedule(iterations=5000, learning_rate=DEFAULT_STAGE1_LR)
    )
    stage1p: StageSchedule = Field(
        default_factory=lambda: StageSchedule(iterations=2000, learning_rate=DEFAULT_STAGE1_LR)
    )
    stage2: StageSchedule = Field(
        default_factory=lambda: StageSchedule(iterations=3000, learning_rate=DEFAULT_STAGE2_LR)
    )

    def for_stage(self, stage: Stage) -> StageSchedule:
        return getattr(self, Stage(stage).value)


class RunConfig(ValidateBaseModel):
    """
    Root configuration of a run. Loaded from JSON with `RunConfig.parse_file`; the schema is
    `RunConfig.schema_json()`.

    Attributes:
        dataset (DatasetConfig): Toy dataset generation.
        prior (PriorConfig): Prior extractor sizes.
        restorer (RestorerConfig): VAE, DiT and fusion sizes, t*.
        weights (LossWeights): Loss weights.
        schedules (Schedules): Per-stage optimization schedules.
        discriminator_channels (int): Base width of the Stage-1 discriminator.
        seed (int): Seed of batch sampling.
        output_dir (str): Directory for datasets, checkpoints and reports.
    """

    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    prior: PriorConfig = Field(default_factory=PriorConfig)
    restorer: RestorerConfig = Field(default_factory=RestorerConfig)
    weights: LossWeights = Field(default_factory=LossWeights)
    schedules: Schedules = Field(default_factory=Schedules)
    discriminator_channels: int = 32
    seed: int = 0
    output_dir: str = "runs/default"

    @root_validator(skip_on_failure=True)
    def grids_are_aligned(cls, values: dict) -> dict:
        dataset, prior, restorer = values["dataset"], values["prior"], values["restorer"]

        restorer.check_alignment(prior)

        grid = prior.grid_shape(dataset.frames, dataset.height, dataset.width)
        for name, limit in (("prior", prior.max_grid), ("restorer", restorer.max_grid)):
            if any(size > bound for size, bound in zip(grid, limit)):
                raise ConfigurationError(
                    f"token grid {grid} exceeds the {name} positional tables {tuple(limit)}"
                )
        if grid[0] * grid[1] * grid[2] > prior.max_tokens:
            raise ConfigurationError(f"token grid {grid} exceeds prior.max_tokens={prior.max_tokens}")

        return values

    def _document(self) -> dict:
        document = json.loads(self.json())
        # where a run writes does not change what it computes
        document.pop("output_dir")
        return document

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON dump; independent of field order"""
        return _hash(self._document())

    @property
    def base_hash(self) -> str:
        """Hash of the settings Stages 0 to 1' depend on.

        Fusion, t*, lambda_temp and the Stage-2 schedule are left out, so every prior ablation of one base config
        reuses the same upstream checkpoints.
        """
        document = self._document()
        document["restorer"]["fusion"] = None
        document["restorer"]["t_star"] = None
        document["weights"]["lambda_temp"] = None
        document["schedules"]["stage2"] = None
        return _hash(document)

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @property
    def dataset_path(self) -> Path:
        return self.output_path / "dataset"

    def checkpoint_path(self, stage: Stage) -> Path:
        stage = Stage(stage)
        if stage == Stage.STAGE2:
            return self.output_path / "checkpoints" / f"stage2_{self.run_label}.ckpt"
        return self.output_path / "checkpoints" / f"{stage.value}.ckpt"

    @property
    def run_label(self) -> str:
        """Names the Stage-2 variant, ie "both" or "both_symmetric" """
        fusion = self.restorer.fusion
        if fusion.prior_mode == PriorMode.BOTH and fusion.variant != FusionVariant.ASYMMETRIC:
            return f"{fusion.prior_mode.value}_{fusion.variant.value}"
        return fusion.prior_mode.value

    def state_path(self, stage: Stage) -> Path:
        return self.checkpoint_path(stage).with_suffix(".state")

    @property
    def reports_path(self) -> Path:
        return self.output_path / "reports"

    def with_seed(self, seed: int) -> "RunConfig":
        """A copy whose initialization and batch sampling use seed, written under `output_dir/seed_<seed>`.

        The dataset seeds are kept, so every copy trains and tests on the same clips.
        """
        config = self.copy(deep=True)
        config.prior = config.prior.copy(update={"seed": seed})
        config.restorer = config.restorer.copy(update={"seed": seed})
        config.seed = seed
        config.output_dir = str(self.output_path / f"seed_{seed}")
        return config

    def with_prior_mode(self, mode: PriorMode, variant: FusionVariant = None) -> "RunConfig":
        """A copy with a different prior mode (and optionally fusion variant)"""
        config = self.copy(deep=True)
        fusion = config.restorer.fusion.copy(update={"prior_mode": PriorMode(mode)})
        if variant is not None:
            fusion = fusion.copy(update={"variant": FusionVariant(variant)})
        config.restorer = config.restorer.copy(update={"fusion": FusionConfig(**fusion.dict())})
        return config


def _hash(document: dict) -> str:
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: PathLike) -> RunConfig:
    """Parses a JSON run config.

    Raises:
        DatasetNotFoundError: If the file does not exist.
        pydantic.ValidationError: If a value is invalid.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetNotFoundError(path)
    return RunConfig.parse_file(path)


def tiny_config(output_dir: PathLike = "runs/tiny", seed: int = 0, iterations: int = 2) -> RunConfig:
    """A configuration small enough for property checks and unit tests: 16x16 clips of 4 frames"""
    schedule = lambda lr: StageSchedule(iterations=iterations, learning_rate=lr, batch_size=2, log_every=1)

    return RunConfig(
        dataset=DatasetConfig(
            num_train=2,
            num_test=1,
            frames=4,
            height=16,
            width=16,
            seed=seed,
            max_speed=1,
            degradation=DegradeConfig(downscale_factors=[2], seed=seed),
        ),
        prior=PriorConfig(
            codebook_size=16,
            code_dim=8,
            hidden_channels=16,
            temporal_heads=2,
            transformer_width=32,
            transformer_layers=1,
            transformer_heads=2,
            max_grid=(4, 4, 4),
            max_tokens=64,
            seed=seed,
        ),
        restorer=RestorerConfig(
            latent_dim=4,
            vae_hidden=16,
            width=32,
            depth=2,
            heads=2,
            timestep_frequencies=32,
            max_grid=(4, 4, 4),
            fusion=FusionConfig(modulation_hidden=16),
            seed=seed,
        ),
        schedules=Schedules(
            stage0=schedule(1e-3),
            stage1=schedule(1e-3),
            stage1p=schedule(1e-3),
            stage2=schedule(1e-3),
        ),
        discriminator_channels=8,
        seed=seed,
        output_dir=str(output_dir),
    )


class BaselineTargets(ValidateBaseModel):
    """
    Outcomes a run of `baseline_config` has to reach.

    Attributes:
        vae_psnr_db (float): Lower bound on the Stage-0 round-trip PSNR.
        stage1_l1 (float): Upper bound on the mean Stage-1 reconstruction L1 over the training clips.
        code_accuracy (float): Lower bound on both Stage-1' index accuracies.
        prior_agreement (float): Lower bound on the agreement of predicted and nearest-neighbor codes on HQ input.
        psnr_gain_db (float): Lower bound on the Stage-2 PSNR gain over the LQ inputs.
        seeds (Tuple[int, ...]): Seeds of the ablation runs.
        majority (int): Seeds in which an ablation ordering has to hold.
    """

    vae_psnr_db: float = 30.0
    stage1_l1: float = 0.05
    code_accuracy: float = 0.9
    prior_agreement: float = 0.9
    psnr_gain_db: float = 2.0
    seeds: Tuple[int, ...] = (0, 1, 2)
    majority: int = 2

    @root_validator(skip_on_failure=True)
    def majority_of_seeds(cls, values: dict) -> dict:
        if not 0 < values["majority"] <= len(values["seeds"]):
            raise ValueError("majority must lie within 1 and the number of seeds")
        return values


def baseline_config(output_dir: PathLike = "runs/baseline", seed: int = 0) -> RunConfig:
    """The pinned desk-scale run that `BaselineTargets` are measured on: 8 training clips of 4 16x16 frames"""
    schedule = lambda iterations, lr: StageSchedule(
        iterations=iterations, learning_rate=lr, batch_size=4, log_every=100, checkpoint_every=500
    )

    return RunConfig(
        dataset=DatasetConfig(
            num_train=8,
            num_test=4,
            frames=4,
            height=16,
            width=16,
            seed=seed,
            max_speed=1,
            degradation=DegradeConfig(downscale_factors=[2], seed=seed),
        ),
        prior=PriorConfig(
            codebook_size=64,
            code_dim=16,
            hidden_channels=32,
            temporal_heads=2,
            transformer_width=64,
            transformer_layers=2,
            transformer_heads=4,
            max_grid=(4, 4, 4),
            max_tokens=64,
            seed=seed,
        ),
        restorer=RestorerConfig(
            latent_dim=4,
            vae_hidden=32,
            width=64,
            depth=4,
            heads=4,
            timestep_frequencies=32,
            max_grid=(4, 4, 4),
            fusion=FusionConfig(modulation_hidden=32),
            seed=seed,
        ),
        schedules=Schedules(
            stage0=schedule(1500, 1e-3),
            stage1=schedule(2000, 1e-3),
            stage1p=schedule(1000, 1e-3),
            stage2=schedule(1500, 5e-4),
        ),
        discriminator_channels=16,
        seed=seed,
        output_dir=str(output_dir),
    )
