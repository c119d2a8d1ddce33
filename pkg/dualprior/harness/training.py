import copy
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Union

import numpy as np
import torch
from einops import rearrange
from pydantic import Field
from torch import nn
from tqdm import tqdm

from ..common.checkpoint import Checkpoint, load_module_state, module_state
from ..common.enums import CodebookKind, Stage
from ..common.exceptions import (
    CheckpointError,
    DivergenceError,
    DualPriorError,
    FreezeViolationError,
)
from ..common.models import ArrayModel
from ..common.random import keyed_rng, seeded_init
from ..common.types import FlowTensor, VideoTensor
from ..data.dataset import load_dataset
from ..data.models import ToyDataset
from ..losses.networks import Discriminator, FeatureExtractor
from ..losses.objectives import (
    LossOutput,
    discriminator_step,
    stage0_loss,
    stage1_loss,
    stage1p_loss,
    stage2_loss,
)
from ..metrics.quality import psnr
from ..prior.network import StdcModel
from ..restore.pipeline import Restorer
from ..restore.vae import TinyVAE
from .config import RunConfig
from .reports import write_loss_curves

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

TRAIN_STATE_KIND = "train_state"


class Batch(NamedTuple):
    indices: List[int]
    hq: VideoTensor
    lq: VideoTensor
    flows_fw: FlowTensor
    flows_bw: FlowTensor


class TrainState(ArrayModel):
    """
    Everything needed to continue a stage exactly where it stopped.

    Attributes:
        stage (Stage): The stage being trained.
        iteration (int): Completed optimizer steps.
        models (Dict[str, Any]): Parameter and buffer snapshots per module name.
        optimizers (Dict[str, Any]): Optimizer state dicts (AdamW moments and step counts) per name.
        history (List[Dict[str, float]]): One row of loss terms and metrics per completed iteration.
        rng_state (Optional[np.ndarray]): torch's CPU generator state.
        config_hash (str): Hash of the RunConfig being trained.
    """

    stage: Stage
    iteration: int = 0
    models: Dict[str, Any] = Field(default_factory=dict)
    optimizers: Dict[str, Any] = Field(default_factory=dict)
    history: List[Dict[str, float]] = Field(default_factory=list)
    rng_state: Optional[np.ndarray] = None
    config_hash: str = ""

    def save(self, path: PathLike) -> Path:
        checkpoint = Checkpoint(
            kind=TRAIN_STATE_KIND,
            config_hash=self.config_hash,
            state={"models": self.models, "optimizers": self.optimizers, "rng_state": self.rng_state},
            meta={"stage": self.stage.value, "iteration": self.iteration, "history": self.history},
        )
        return checkpoint.save(path)

    @classmethod
    def load(cls, path: PathLike, config_hash: Optional[str] = None) -> "TrainState":
        """Loads a train state, validating its config hash when one is given

        Raises:
            DatasetNotFoundError: If the file does not exist.
            ConfigHashMismatchError: If the state belongs to another configuration.
        """
        checkpoint = Checkpoint.load(path, kind=TRAIN_STATE_KIND, config_hash=config_hash)
        return cls(
            stage=Stage(checkpoint.meta["stage"]),
            iteration=checkpoint.meta["iteration"],
            models=checkpoint.state["models"],
            optimizers=checkpoint.state["optimizers"],
            history=checkpoint.meta["history"],
            rng_state=checkpoint.state.get("rng_state"),
            config_hash=checkpoint.config_hash,
        )


def _stack(arrays: List[np.ndarray]) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(np.stack(arrays), dtype=np.float32))


def snapshot_parameters(groups: Dict[str, List[nn.Parameter]]) -> Dict[str, List[torch.Tensor]]:
    return {name: [p.detach().clone() for p in params] for name, params in groups.items()}


def verify_frozen(
    snapshot: Dict[str, List[torch.Tensor]], groups: Dict[str, List[nn.Parameter]], stage: Stage
) -> None:
    """Asserts that every parameter of the frozen groups is bit-identical to its snapshot.

    Raises:
        FreezeViolationError: Naming the first group that changed.
    """
    for name, before in snapshot.items():
        after = groups[name]
        if any(not torch.equal(a, b.detach()) for a, b in zip(before, after)):
            raise FreezeViolationError(
                f"frozen group {name} changed during {Stage(stage).value}",
                {"group": name, "stage": Stage(stage).value},
            )


class StageTrainer(ABC):
    """
    Shared loop of all training stages.

    Each iteration samples a batch from a generator keyed on (seed, iteration, stage), so a resumed run draws the
    same batches as an uninterrupted one. Non-finite losses abort before the optimizer step. Frozen parameter groups
    are snapshotted when training starts and compared bit-exactly when it ends.

    Args:
        config (RunConfig): The run configuration.
        dataset (ToyDataset): Training data; only the train split is sampled.
    """

    stage: Stage
    checkpoint_kind: str

    def __init__(self, config: RunConfig, dataset: ToyDataset):
        self.config = config
        self.schedule = config.schedules.for_stage(self.stage)
        self.iteration = 0
        self.history: List[Dict[str, float]] = []

        train = dataset.train
        if not train:
            raise DualPriorError(f"{self.stage.value} needs at least one training clip")

        self.dataset = dataset
        self._hq = _stack([item.hq.frames for item in train])
        self._lq = _stack([item.lq.frames for item in train])
        self._flows_fw = _stack([item.flows.forward for item in train])
        self._flows_bw = _stack([item.flows.backward for item in train])

        self.build()
        for params in self.frozen_groups().values():
            for p in params:
                p.requires_grad_(False)

        self.optimizer = self.make_optimizer(self.trainable_parameters())

    @property
    def checkpoint_hash(self) -> str:
        """Hash written into the stage's checkpoint; upstream stages use the fusion independent base hash"""
        return self.config.base_hash

    @abstractmethod
    def build(self) -> None:
        """Constructs or loads the modules the stage trains"""

    @abstractmethod
    def modules(self) -> Dict[str, nn.Module]:
        """Modules whose state is part of the train state"""

    @abstractmethod
    def trainable_parameters(self) -> List[nn.Parameter]:
        ...

    def frozen_groups(self) -> Dict[str, List[nn.Parameter]]:
        return {}

    @abstractmethod
    def compute_loss(self, batch: Batch) -> LossOutput:
        ...

    def after_step(self, batch: Batch, output: LossOutput) -> Dict[str, float]:
        """Hook run after the optimizer step; returns extra metrics for the history row"""
        return {}

    @abstractmethod
    def checkpoint(self) -> Checkpoint:
        ...

    def make_optimizer(self, params: List[nn.Parameter]) -> torch.optim.Optimizer:
        return torch.optim.AdamW(
            params,
            lr=self.schedule.learning_rate,
            betas=tuple(self.schedule.betas),
            weight_decay=self.schedule.weight_decay,
        )

    def optimizers(self) -> Dict[str, torch.optim.Optimizer]:
        return {"main": self.optimizer}

    def sample_batch(self, iteration: int) -> Batch:
        count = self._hq.shape[0]
        rng = keyed_rng(self.config.seed, iteration, self.stage.value)
        indices = rng.choice(count, size=self.schedule.batch_size, replace=count < self.schedule.batch_size)
        index = torch.from_numpy(np.asarray(indices, dtype=np.int64))

        return Batch(
            indices=[int(i) for i in indices],
            hq=self._hq[index],
            lq=self._lq[index],
            flows_fw=self._flows_fw[index],
            flows_bw=self._flows_bw[index],
        )

    def state(self) -> TrainState:
        return TrainState(
            stage=self.stage,
            iteration=self.iteration,
            models={name: module_state(module) for name, module in self.modules().items()},
            optimizers={name: opt.state_dict() for name, opt in self.optimizers().items()},
            history=list(self.history),
            rng_state=torch.get_rng_state().numpy(),
            config_hash=self.config.config_hash,
        )

    def restore_state(self, state: TrainState) -> None:
        """Loads a train state produced by `state()` of the same stage.

        Raises:
            CheckpointError: If the state belongs to another stage or lacks a module.
        """
        if state.stage != self.stage:
            raise CheckpointError(
                f"train state of {state.stage.value} cannot resume {self.stage.value}",
                {"stage": state.stage.value},
            )

        for name, module in self.modules().items():
            if name not in state.models:
                raise CheckpointError(f"train state lacks module {name}", {"module": name})
            load_module_state(module, state.models[name])
        for name, opt in self.optimizers().items():
            opt.load_state_dict(state.optimizers[name])
        if state.rng_state is not None:
            torch.set_rng_state(torch.from_numpy(np.asarray(state.rng_state, dtype=np.uint8)))

        self.iteration = state.iteration
        self.history = list(state.history)

        log.info(f"resumed {self.stage.value} at iteration {self.iteration}")

    def on_start(self) -> None:
        pass

    def step(self, iteration: int) -> Dict[str, float]:
        """One optimizer step.

        Raises:
            DivergenceError: If the total loss is not finite.
        """
        batch = self.sample_batch(iteration)
        output = self.compute_loss(batch)

        if not torch.isfinite(output.total):
            raise DivergenceError(
                f"{self.stage.value} loss is {float(output.total)} at iteration {iteration}",
                {"stage": self.stage.value, "iteration": iteration},
            )

        self.optimizer.zero_grad(set_to_none=True)
        output.total.backward()
        if self.schedule.grad_clip > 0:
            nn.utils.clip_grad_norm_(self.trainable_parameters(), self.schedule.grad_clip)
        self.optimizer.step()

        report = output.report(self.stage, self.config.weights)
        row = {"iteration": float(iteration), "total": report.total, **output_terms(output)}
        row.update(self.after_step(batch, output))

        return row

    def train(self, iterations: Optional[int] = None, state_path: Optional[PathLike] = None) -> List[Dict[str, float]]:
        """Runs the stage until `iterations` optimizer steps have been completed in total.

        Args:
            iterations (Optional[int]): Target iteration count. Defaults to the schedule's.
            state_path (Optional[PathLike]): Where to save the train state, every `checkpoint_every` iterations and
                afterwards. Defaults to None.

        Raises:
            DivergenceError: If a loss becomes non-finite.
            FreezeViolationError: If a frozen group changed.

        Returns:
            List[Dict[str, float]]: The full history, one row per iteration
        """
        target = self.schedule.iterations if iterations is None else iterations
        frozen = self.frozen_groups()
        snapshot = snapshot_parameters(frozen)

        log.info(
            f"training {self.stage.value} from iteration {self.iteration} to {target} "
            f"(lr={self.schedule.learning_rate}, batch={self.schedule.batch_size})"
        )
        self.on_start()

        for module in self.modules().values():
            module.train()

        progress = tqdm(range(self.iteration, target), desc=self.stage.value, disable=None, leave=False)
        for iteration in progress:
            row = self.step(iteration)
            self.history.append(row)
            self.iteration = iteration + 1

            progress.set_postfix(loss=f"{row['total']:.4f}")
            if self.iteration % self.schedule.log_every == 0:
                log.info(f"{self.stage.value} iteration {self.iteration}: " + _format_row(row))
            else:
                log.debug(f"{self.stage.value} iteration {self.iteration}: " + _format_row(row))

            every = self.schedule.checkpoint_every
            if state_path is not None and every and self.iteration % every == 0 and self.iteration < target:
                self.state().save(state_path)

        verify_frozen(snapshot, frozen, self.stage)
        if state_path is not None:
            self.state().save(state_path)

        log.info(f"finished {self.stage.value} at iteration {self.iteration}")

        return self.history


def output_terms(output: LossOutput) -> Dict[str, float]:
    return {name: float(value.detach()) for name, value in output.terms.items()}


def _format_row(row: Dict[str, float]) -> str:
    return " ".join(f"{key}={value:.4f}" for key, value in row.items() if key != "iteration")


class Stage0Trainer(StageTrainer):
    """Pretrains the VAE stand-in on HQ clips with pixel MSE + L1"""

    stage = Stage.STAGE0
    checkpoint_kind = "vae"

    def build(self) -> None:
        restorer = self.config.restorer
        with seeded_init(restorer.seed, "vae"):
            self.vae = TinyVAE(restorer.latent_dim, restorer.vae_hidden, restorer.vae_stride)

    def modules(self) -> Dict[str, nn.Module]:
        return {"vae": self.vae}

    def trainable_parameters(self) -> List[nn.Parameter]:
        return list(self.vae.parameters())

    def compute_loss(self, batch: Batch) -> LossOutput:
        return stage0_loss(self.vae(batch.hq), batch.hq)

    def round_trip_psnr(self) -> float:
        """Mean PSNR of decode(encode(x)) over the test split, or the train split when there is none"""
        items = self.dataset.test or self.dataset.train
        self.vae.eval()
        with torch.no_grad():
            values = [
                psnr(self.vae(_stack([item.hq.frames]))[0].numpy(), item.hq.frames) for item in items
            ]
        self.vae.train()
        return float(np.mean(values))

    def checkpoint(self) -> Checkpoint:
        value = self.round_trip_psnr()
        log.info(f"VAE round-trip psnr {value:.2f} dB")
        return Checkpoint(
            kind=self.checkpoint_kind,
            config_hash=self.checkpoint_hash,
            state=module_state(self.vae),
            meta={"stage": self.stage.value, "iterations": self.iteration, "round_trip_psnr": value},
        )


class Stage1Trainer(StageTrainer):
    """
    Codebook learning: trains the prior extractor's autoencoder and both codebooks on HQ reconstruction, alternating
    one generator step with one discriminator step.
    """

    stage = Stage.STAGE1
    checkpoint_kind = "stdc"

    def build(self) -> None:
        self.stdc = StdcModel(self.config.prior)
        with seeded_init(self.config.prior.seed, "discriminator"):
            self.discriminator = Discriminator(self.config.discriminator_channels)
        self.extractor = FeatureExtractor(self.config.weights.perceptual_seed)
        self.d_optimizer = self.make_optimizer(list(self.discriminator.parameters()))
        self._fake: Optional[VideoTensor] = None

    def modules(self) -> Dict[str, nn.Module]:
        return {"stdc": self.stdc, "discriminator": self.discriminator}

    def optimizers(self) -> Dict[str, torch.optim.Optimizer]:
        return {"main": self.optimizer, "discriminator": self.d_optimizer}

    def trainable_parameters(self) -> List[nn.Parameter]:
        groups = self.stdc.parameter_groups()
        # the code prediction transformers only train in Stage 1'
        return [p for name, params in groups.items() if name != "transformers" for p in params]

    def compute_loss(self, batch: Batch) -> LossOutput:
        output = self.stdc.reconstruct(batch.hq)
        self._fake = output.reconstruction
        # the generator step must not move the discriminator
        self.discriminator.requires_grad_(False)
        loss = stage1_loss(
            output.reconstruction,
            batch.hq,
            output.z_h,
            output.z_q,
            self.discriminator,
            self.extractor,
            self.config.weights,
        )
        self.discriminator.requires_grad_(True)
        return loss

    def after_step(self, batch: Batch, output: LossOutput) -> Dict[str, float]:
        d_loss = discriminator_step(
            batch.hq,
            self._fake.detach(),
            self.discriminator,
            self.d_optimizer,
            grad_clip=self.schedule.grad_clip,
        )
        self._fake = None
        return {"adv_d": d_loss}

    def reconstruction_l1(self) -> float:
        """Mean absolute error of the quantized reconstruction over the training clips"""
        self.stdc.eval()
        with torch.no_grad():
            value = float((self.stdc.reconstruct(self._hq).reconstruction - self._hq).abs().mean())
        self.stdc.train()
        return value

    def checkpoint(self) -> Checkpoint:
        l1 = self.reconstruction_l1()
        log.info(f"stage1 reconstruction l1 {l1:.4f}")
        return Checkpoint(
            kind=self.checkpoint_kind,
            config_hash=self.checkpoint_hash,
            state={"stdc": module_state(self.stdc), "discriminator": module_state(self.discriminator)},
            meta={"stage": self.stage.value, "iterations": self.iteration, "reconstruction_l1": l1},
        )


class CodeTargets(NamedTuple):
    """Ground-truth code indices and entries of the HQ training clips, from the Stage-1 model"""

    spatial: torch.Tensor
    temporal: torch.Tensor
    entries: torch.Tensor


class Stage1pTrainer(StageTrainer):
    """
    Code prediction: trains both transformers and fine-tunes the encoder, temporal interaction and spatial path on
    LQ inputs, with the decoder and both codebooks frozen. Targets are the nearest-neighbor codes of the HQ clips
    under the Stage-1 model.

    Args:
        config (RunConfig): The run configuration.
        dataset (ToyDataset): Paired training data.
        stage1 (Checkpoint): The Stage-1 checkpoint to start from.
    """

    stage = Stage.STAGE1P
    checkpoint_kind = "stdc"

    def __init__(self, config: RunConfig, dataset: ToyDataset, stage1: Checkpoint):
        self._stage1 = stage1
        super().__init__(config, dataset)

    def build(self) -> None:
        self.stdc = StdcModel(self.config.prior)
        load_module_state(self.stdc, self._stage1.state["stdc"])
        self.targets = self.code_targets(copy.deepcopy(self.stdc))

    def code_targets(self, reference: StdcModel) -> CodeTargets:
        reference.eval()
        with torch.no_grad():
            z_s, z_t = reference.paths(self._hq)
            q_s = reference.quantize(z_s, CodebookKind.SPATIAL)
            q_t = reference.quantize(z_t, CodebookKind.TEMPORAL)

        return CodeTargets(
            spatial=q_s.indices,
            temporal=q_t.indices,
            entries=torch.cat([q_s.values, q_t.values], dim=-1),
        )

    def modules(self) -> Dict[str, nn.Module]:
        return {"stdc": self.stdc}

    def frozen_groups(self) -> Dict[str, List[nn.Parameter]]:
        groups = self.stdc.parameter_groups()
        return {"decoder": groups["decoder"], "codebooks": groups["codebooks"]}

    def trainable_parameters(self) -> List[nn.Parameter]:
        groups = self.stdc.parameter_groups()
        names = ("encoder", "temporal", "spatial", "transformers")
        return [p for name in names for p in groups[name]]

    def compute_loss(self, batch: Batch) -> LossOutput:
        index = torch.as_tensor(batch.indices)
        z_s, z_t = self.stdc.paths(batch.lq)

        self._logits = (
            self.stdc.predict_codes(z_s, CodebookKind.SPATIAL),
            self.stdc.predict_codes(z_t, CodebookKind.TEMPORAL),
        )
        self._targets = (self.targets.spatial[index], self.targets.temporal[index])

        return stage1p_loss(
            self._logits[0],
            self._logits[1],
            self._targets[0],
            self._targets[1],
            torch.cat([z_s, z_t], dim=-1),
            self.targets.entries[index],
            self.config.weights,
        )

    def after_step(self, batch: Batch, output: LossOutput) -> Dict[str, float]:
        accuracy = {}
        for name, logits, targets in zip(("acc_s", "acc_t"), self._logits, self._targets):
            predicted = logits.detach().argmax(dim=-1)
            accuracy[name] = float((predicted == rearrange(targets, "b t h w -> b (t h w)")).float().mean())
        return accuracy

    def accuracy(self) -> Dict[str, float]:
        """Index accuracy of predict_indices on LQ inputs against the HQ targets of the training clips"""
        self.stdc.eval()
        with torch.no_grad():
            predicted = self.stdc.predict_indices(self._lq)
        self.stdc.train()
        return {
            "acc_s": float((predicted.spatial == self.targets.spatial).float().mean()),
            "acc_t": float((predicted.temporal == self.targets.temporal).float().mean()),
        }

    def checkpoint(self) -> Checkpoint:
        accuracy = self.accuracy()
        log.info(f"code prediction accuracy: spatial {accuracy['acc_s']:.3f}, temporal {accuracy['acc_t']:.3f}")
        return Checkpoint(
            kind=self.checkpoint_kind,
            config_hash=self.checkpoint_hash,
            state={"stdc": module_state(self.stdc)},
            meta={"stage": self.stage.value, "iterations": self.iteration, **accuracy},
        )


class Stage2Trainer(StageTrainer):
    """
    One-step restorer training: the DiT, the VAE decoder, the fusion modules and the null text embedding are
    optimized jointly while the prior extractor and the VAE encoder stay fixed.

    Args:
        config (RunConfig): The run configuration; its fusion section selects the prior mode.
        dataset (ToyDataset): Paired training data.
        stdc (Checkpoint): The Stage-1' checkpoint.
        vae (Checkpoint): The Stage-0 checkpoint.
    """

    stage = Stage.STAGE2
    checkpoint_kind = "restorer"

    def __init__(self, config: RunConfig, dataset: ToyDataset, stdc: Checkpoint, vae: Checkpoint):
        self._stdc_checkpoint = stdc
        self._vae_checkpoint = vae
        super().__init__(config, dataset)

    @property
    def checkpoint_hash(self) -> str:
        return self.config.config_hash

    def build(self) -> None:
        self.stdc = StdcModel(self.config.prior)
        load_module_state(self.stdc, self._stdc_checkpoint.state["stdc"])
        self.stdc.eval()

        self.restorer = Restorer(self.config.restorer, self.config.prior)
        load_module_state(self.restorer.vae, self._vae_checkpoint.state)

        self.extractor = FeatureExtractor(self.config.weights.perceptual_seed)

    def modules(self) -> Dict[str, nn.Module]:
        return {"restorer": self.restorer}

    def frozen_groups(self) -> Dict[str, List[nn.Parameter]]:
        return {
            "prior_extractor": list(self.stdc.parameters()),
            "vae_encoder": self.restorer.parameter_groups()["vae_encoder"],
        }

    def trainable_parameters(self) -> List[nn.Parameter]:
        groups = self.restorer.parameter_groups()
        names = ("dit", "vae_decoder", "fusion", "c_text")
        return [p for name in names for p in groups[name]]

    def on_start(self) -> None:
        if self.iteration == 0:
            self.verify_transparency()

    def verify_transparency(self, tolerance: float = 1e-6) -> float:
        """With the zero-initialized velocity head, restoration must equal the VAE round trip of the LQ input.

        Raises:
            DualPriorError: If the difference exceeds tolerance.

        Returns:
            float: The max abs difference
        """
        lq = self._lq[:1]
        was_training = self.restorer.training
        self.restorer.eval()
        with torch.no_grad():
            restored = self.restorer.restore(lq, self.stdc).video
            round_trip = self.restorer.vae_decode(self.restorer.vae_encode(lq))
        self.restorer.train(was_training)

        difference = float((restored - round_trip).abs().max())
        if difference > tolerance:
            raise DualPriorError(
                f"restorer is not transparent at initialization: max abs difference {difference}",
                {"difference": difference},
            )

        log.info(f"zero-init transparency verified, max abs difference {difference:.2e}")
        return difference

    def compute_loss(self, batch: Batch) -> LossOutput:
        with torch.no_grad():
            z_hq = self.restorer.vae_encode(batch.hq)
            z_lq = self.restorer.vae_encode(batch.lq)
            priors = self.stdc.extract_priors(batch.lq) if self.restorer.fusion is not None else None

        z_hat = self.restorer.restore_latent(z_lq, priors)
        x_hat = self.restorer.vae_decode(z_hat)

        return stage2_loss(
            z_hat,
            z_hq,
            x_hat,
            batch.hq,
            batch.flows_fw,
            batch.flows_bw,
            self.extractor,
            self.config.weights,
        )

    def checkpoint(self) -> Checkpoint:
        fusion = self.config.restorer.fusion
        return Checkpoint(
            kind=self.checkpoint_kind,
            config_hash=self.checkpoint_hash,
            state={"restorer": module_state(self.restorer)},
            meta={
                "stage": self.stage.value,
                "iterations": self.iteration,
                "t_star": self.config.restorer.t_star,
                "prior_mode": fusion.prior_mode.value,
                "variant": fusion.variant.value,
                "base_hash": self.config.base_hash,
            },
        )


def _dataset(config: RunConfig, dataset: Optional[ToyDataset]) -> ToyDataset:
    return dataset if dataset is not None else load_dataset(config.dataset_path)


def _run(trainer: StageTrainer, resume: bool) -> Checkpoint:
    config = trainer.config
    state_path = config.state_path(trainer.stage)

    if resume and state_path.is_file():
        trainer.restore_state(TrainState.load(state_path, config_hash=config.config_hash))

    trainer.train(state_path=state_path)

    checkpoint = trainer.checkpoint()
    checkpoint.meta["history"] = trainer.history
    checkpoint.save(config.checkpoint_path(trainer.stage))

    label = config.run_label if trainer.stage == Stage.STAGE2 else trainer.stage.value
    write_loss_curves(trainer.history, config.reports_path / f"{label}_loss.png", title=label)

    return checkpoint


def train_stage0(config: RunConfig, dataset: Optional[ToyDataset] = None, resume: bool = False) -> Checkpoint:
    """Pretrains the VAE stand-in and saves a "vae" checkpoint.

    Args:
        config (RunConfig): The run configuration.
        dataset (Optional[ToyDataset]): Training data. Defaults to the dataset under config.output_dir.
        resume (bool): Continue from a saved train state if one exists. Defaults to False.

    Returns:
        Checkpoint: The saved checkpoint
    """
    return _run(Stage0Trainer(config, _dataset(config, dataset)), resume)


def train_stage1(config: RunConfig, dataset: Optional[ToyDataset] = None, resume: bool = False) -> Checkpoint:
    """Codebook learning on HQ clips; saves a "stdc" checkpoint holding the prior extractor and discriminator.

    Raises:
        DivergenceError: If the loss becomes non-finite.
    """
    return _run(Stage1Trainer(config, _dataset(config, dataset)), resume)


def train_stage1p(
    config: RunConfig,
    stage1_ckpt: Optional[Checkpoint] = None,
    dataset: Optional[ToyDataset] = None,
    resume: bool = False,
) -> Checkpoint:
    """Code prediction from LQ inputs with the decoder and codebooks frozen.

    Args:
        config (RunConfig): The run configuration.
        stage1_ckpt (Optional[Checkpoint]): The Stage-1 checkpoint. Defaults to the one under config.output_dir.
        dataset (Optional[ToyDataset]): Training data. Defaults to the dataset under config.output_dir.
        resume (bool): Continue from a saved train state if one exists. Defaults to False.

    Raises:
        DatasetNotFoundError: If the Stage-1 checkpoint is missing.
        ConfigHashMismatchError: If it was trained under another base configuration.
        FreezeViolationError: If the decoder or a codebook changed.

    Returns:
        Checkpoint: The saved "stdc" checkpoint
    """
    if stage1_ckpt is None:
        stage1_ckpt = Checkpoint.load(
            config.checkpoint_path(Stage.STAGE1), kind="stdc", config_hash=config.base_hash
        )
    return _run(Stage1pTrainer(config, _dataset(config, dataset), stage1_ckpt), resume)


def train_stage2(
    config: RunConfig,
    stdc_ckpt: Optional[Checkpoint] = None,
    vae_ckpt: Optional[Checkpoint] = None,
    dataset: Optional[ToyDataset] = None,
    resume: bool = False,
) -> Checkpoint:
    """Trains the one-step restorer under config.restorer.fusion.

    Args:
        config (RunConfig): The run configuration.
        stdc_ckpt (Optional[Checkpoint]): The Stage-1' checkpoint. Defaults to the one under config.output_dir.
        vae_ckpt (Optional[Checkpoint]): The Stage-0 checkpoint. Defaults to the one under config.output_dir.
        dataset (Optional[ToyDataset]): Training data. Defaults to the dataset under config.output_dir.
        resume (bool): Continue from a saved train state if one exists. Defaults to False.

    Raises:
        DatasetNotFoundError: If a prerequisite checkpoint is missing.
        ConfigHashMismatchError: If a prerequisite was trained under another base configuration.
        FreezeViolationError: If the prior extractor or the VAE encoder changed.

    Returns:
        Checkpoint: The saved "restorer" checkpoint
    """
    if stdc_ckpt is None:
        stdc_ckpt = Checkpoint.load(
            config.checkpoint_path(Stage.STAGE1P), kind="stdc", config_hash=config.base_hash
        )
    if vae_ckpt is None:
        vae_ckpt = Checkpoint.load(config.checkpoint_path(Stage.STAGE0), kind="vae", config_hash=config.base_hash)

    return _run(Stage2Trainer(config, _dataset(config, dataset), stdc_ckpt, vae_ckpt), resume)
