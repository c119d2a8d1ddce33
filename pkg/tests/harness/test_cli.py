import json

import numpy as np
import pytest

from dualprior.common.arrays import read_array, write_array
from dualprior.common.enums import FusionVariant, PriorMode
from dualprior.data.dataset import load_dataset
from dualprior.harness import cli
from dualprior.harness.cli import build_parser, main, resolve_config
from dualprior.harness.config import tiny_config


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(tiny_config(output_dir=tmp_path / "run").json())
    return path


def test_config_schema(capsys):
    assert main(["config-schema"]) == 0

    schema = json.loads(capsys.readouterr().out)
    assert schema["title"] == "RunConfig"
    assert "restorer" in schema["properties"]


def test_unknown_command_exits():
    with pytest.raises(SystemExit):
        main(["train-stage3"])


def test_resolve_config_overrides(config_file, tmp_path):
    args = build_parser().parse_args(
        [
            "train-stage2",
            "--config",
            str(config_file),
            "--seed",
            "9",
            "--out",
            str(tmp_path / "elsewhere"),
            "--priors",
            "temporal",
            "--variant",
            "symmetric",
            "--tstar",
            "0.5",
        ]
    )
    config = resolve_config(args)

    assert config.seed == 9
    assert config.dataset.seed == 9
    assert config.prior.seed == 9
    assert config.output_dir == str(tmp_path / "elsewhere")
    assert config.restorer.t_star == 0.5
    assert config.restorer.fusion.prior_mode == PriorMode.TEMPORAL
    assert config.restorer.fusion.variant == FusionVariant.SYMMETRIC
    # untouched settings come from the file
    assert config.dataset.height == 16


def test_resolve_config_all_priors_keeps_mode(config_file):
    args = build_parser().parse_args(["eval", "--config", str(config_file), "--priors", "all"])

    assert resolve_config(args).restorer.fusion.prior_mode == PriorMode.BOTH


def test_gen_data_writes_manifest(config_file, tmp_path):
    out = tmp_path / "generated"

    assert main(["gen-data", "--config", str(config_file), "--out", str(out), "--workers", "2"]) == 0

    dataset = load_dataset(out / "dataset")
    assert len(dataset.train) == 2
    assert len(dataset.test) == 1


def test_eval_bypass(config_file, tmp_path):
    assert main(["gen-data", "--config", str(config_file)]) == 0
    assert main(["eval", "--config", str(config_file), "--bypass"]) == 0

    assert (tmp_path / "run" / "reports" / "lq_summary.json").is_file()


def test_missing_dataset_returns_one(config_file):
    assert main(["eval", "--config", str(config_file), "--bypass"]) == 1


def test_restore_without_checkpoint_returns_one(config_file, tmp_path):
    clip = tmp_path / "clip.arr"
    write_array(clip, np.zeros((4, 16, 16, 3), dtype=np.float32))

    assert main(["restore", "--config", str(config_file), str(clip), str(tmp_path / "restored.arr")]) == 1
    assert not (tmp_path / "restored.arr").exists()


def test_check_exit_code():
    assert main(["check", "oracles"]) == 0


def test_full_pipeline(config_file, tmp_path):
    common = ["--config", str(config_file)]

    assert main(["gen-data", *common]) == 0
    for command in ("train-stage0", "train-stage1", "train-stage1p", "train-stage2"):
        assert main([command, *common]) == 0, command
    assert main(["eval", *common]) == 0

    dataset = load_dataset(tmp_path / "run" / "dataset")
    source = tmp_path / "lq.arr"
    write_array(source, dataset.test[0].lq.frames)
    restored = tmp_path / "restored.arr"

    assert main(["restore", *common, str(source), str(restored), "--strip", str(tmp_path / "strip.png")]) == 0
    assert read_array(restored).shape == dataset.test[0].lq.frames.shape
    assert (tmp_path / "strip.png").is_file()

    # the saved restorer was trained under another t*
    assert main(["eval", *common, "--tstar", "0.5"]) == 1


def test_invalid_override_returns_one(config_file, caplog):
    assert main(["eval", "--config", str(config_file), "--bypass", "--tstar", "2"]) == 1

    assert "invalid config" in caplog.text


def test_eval_all_priors_forwards_the_ablation_grid(config_file, monkeypatch):
    calls = []
    monkeypatch.setattr(cli, "run_ablation", lambda config, **kwargs: calls.append(kwargs))

    argv = ["eval", "--config", str(config_file), "--priors", "all", "--seeds", "0", "1", "--train"]
    assert main([*argv, "--variants", "asymmetric", "independent_modulation"]) == 0

    assert calls == [{"train": True, "variants": ["asymmetric", "independent_modulation"], "seeds": [0, 1]}]
