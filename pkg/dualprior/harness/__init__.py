from .checks import CheckReport, CheckResult, register, registered_checks, run_checks
from .config import RunConfig, Schedules, StageSchedule, load_config, tiny_config
from .evaluation import evaluate, evaluate_checkpoints, load_restorer, load_stdc, run_ablation
from .reports import temporal_slice, temporal_slice_strip, write_loss_curves, write_metric_bars
from .training import (
    Stage0Trainer,
    Stage1pTrainer,
    Stage1Trainer,
    Stage2Trainer,
    StageTrainer,
    TrainState,
    train_stage0,
    train_stage1,
    train_stage1p,
    train_stage2,
)
