import json

import pytest
from pydantic import ValidationError

from dualprior.common.enums import FusionVariant, PriorMode, Stage
from dualprior.common.exceptions import DatasetNotFoundError
from dualprior.harness.config import (
    BaselineTargets,
    RunConfig,
    StageSchedule,
    baseline_config,
    load_config,
    tiny_config,
)


def _reverse_keys(document):
    if isinstance(document, dict):
        return {key: _reverse_keys(document[key]) for key in reversed(list(document))}
    return document


def test_config_hash_ignores_field_order(config):
    document = json.loads(config.json())

    reordered = RunConfig.parse_obj(_reverse_keys(document))

    assert reordered.config_hash == config.config_hash
    assert len(config.config_hash) == 64


def test_output_dir_is_not_hashed(config, tmp_path):
    moved = config.copy(update={"output_dir": str(tmp_path / "elsewhere")})

    assert moved.config_hash == config.config_hash
    assert moved.base_hash == config.base_hash


def test_base_hash_ignores_stage2_settings(config):
    variant = config.with_prior_mode(PriorMode.SPATIAL)
    variant.restorer = variant.restorer.copy(update={"t_star": 0.5})

    assert variant.config_hash != config.config_hash
    assert variant.base_hash == config.base_hash


def test_base_hash_tracks_upstream_settings(config):
    changed = config.copy(deep=True)
    changed.prior = changed.prior.copy(update={"codebook_size": 32})

    assert changed.base_hash != config.base_hash


def test_with_prior_mode_copies(config):
    variant = config.with_prior_mode(PriorMode.BOTH, FusionVariant.SYMMETRIC)

    assert variant.restorer.fusion.variant == FusionVariant.SYMMETRIC
    assert config.restorer.fusion.variant == FusionVariant.ASYMMETRIC
    assert variant.run_label == "both_symmetric"
    assert config.run_label == "both"
    assert config.with_prior_mode(PriorMode.NONE).run_label == "none"


def test_paths(config):
    root = config.output_path

    assert config.dataset_path == root / "dataset"
    assert config.checkpoint_path(Stage.STAGE1) == root / "checkpoints" / "stage1.ckpt"
    assert config.checkpoint_path(Stage.STAGE2) == root / "checkpoints" / "stage2_both.ckpt"
    assert config.state_path(Stage.STAGE1P) == root / "checkpoints" / "stage1p.state"
    assert config.reports_path == root / "reports"


def test_misaligned_grids_fail_fast(config):
    document = json.loads(config.json())
    document["prior"]["spatial_stride"] = 2

    with pytest.raises(ValidationError):
        RunConfig.parse_obj(document)


def test_token_budget_is_checked(config):
    document = json.loads(config.json())
    document["dataset"]["height"] = 32
    document["dataset"]["width"] = 32

    # 4 x 8 x 8 tokens exceed both the positional tables and max_tokens
    with pytest.raises(ValidationError):
        RunConfig.parse_obj(document)


def test_default_config_is_valid():
    config = RunConfig()

    assert config.schedules.for_stage(Stage.STAGE2).learning_rate == pytest.approx(3e-5)
    assert config.restorer.t_star == 1.0


def test_schedule_validation():
    with pytest.raises(ValidationError):
        StageSchedule(iterations=0, learning_rate=1e-3)

    with pytest.raises(ValidationError):
        StageSchedule(iterations=1, learning_rate=0.0)

    with pytest.raises(ValidationError):
        StageSchedule(iterations=1, learning_rate=1e-3, checkpoint_every=-1)


def test_load_config(config, tmp_path):
    path = tmp_path / "run.json"
    path.write_text(config.json(indent=2))

    assert load_config(path).config_hash == config.config_hash

    with pytest.raises(DatasetNotFoundError):
        load_config(tmp_path / "missing.json")


def test_tiny_config_seed():
    config = tiny_config(seed=5)

    assert config.dataset.seed == config.prior.seed == config.restorer.seed == 5
    assert config.dataset.degradation.seed == 5


def test_with_seed_keeps_the_dataset(config):
    seeded = config.with_seed(7)

    assert seeded.seed == seeded.prior.seed == seeded.restorer.seed == 7
    assert seeded.dataset == config.dataset
    assert seeded.output_path == config.output_path / "seed_7"
    assert seeded.base_hash != config.base_hash
    assert config.seed == 0


def test_baseline_config_is_pinned(tmp_path):
    config = baseline_config(output_dir=tmp_path)

    assert config.schedules.stage1.checkpoint_every > 0
    assert config.dataset.num_train == 8
    assert config.schedules.stage1.iterations <= 2000
    assert config.config_hash == baseline_config(output_dir=tmp_path / "elsewhere").config_hash


def test_baseline_targets_need_a_reachable_majority():
    assert BaselineTargets().majority == 2

    with pytest.raises(ValidationError):
        BaselineTargets(seeds=(0,), majority=2)
