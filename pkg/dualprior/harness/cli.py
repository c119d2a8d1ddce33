import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from ..common.arrays import read_array, write_array
from ..common.enums import CheckSuite, FusionVariant, PriorMode
from ..common.exceptions import DualPriorError
from ..data.dataset import generate_dataset, load_dataset, save_dataset
from ..data.models import VideoClip
from ..restore.pipeline import one_step_restore
from .checks import run_checks
from .config import RunConfig, load_config
from .evaluation import evaluate, evaluate_checkpoints, load_restorer, load_stdc, run_ablation
from .reports import temporal_slice_strip
from .training import train_stage0, train_stage1, train_stage1p, train_stage2

log = logging.getLogger(__name__)

ALL_PRIORS = "all"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON run config, see `config-schema`")
    parser.add_argument("--seed", type=int, help="overrides every seed of the config")
    parser.add_argument("--out", type=Path, help="overrides output_dir")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _add_restorer_options(parser: argparse.ArgumentParser, allow_all: bool = False) -> None:
    choices = [mode.value for mode in PriorMode] + ([ALL_PRIORS] if allow_all else [])
    parser.add_argument("--priors", choices=choices, help="prior mode of the restorer")
    parser.add_argument("--variant", choices=[v.value for v in FusionVariant], help="fusion variant")
    parser.add_argument("--tstar", type=float, help="overrides restorer.t_star")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualprior", description="One-step video restoration with dual-codebook priors, at desk scale"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", help="generate and save the toy dataset")
    _add_common(gen)
    gen.add_argument("--workers", type=int, help="generation threads")

    for name in ("train-stage0", "train-stage1", "train-stage1p", "train-stage2"):
        train = commands.add_parser(name, help=f"run {name[len('train-'):]}")
        _add_common(train)
        train.add_argument("--resume", action="store_true", help="continue from the saved train state")
        if name == "train-stage2":
            _add_restorer_options(train)

    restore = commands.add_parser("restore", help="restore one clip stored as a binary array file")
    _add_common(restore)
    _add_restorer_options(restore)
    restore.add_argument("input", type=Path)
    restore.add_argument("output", type=Path)
    restore.add_argument("--strip", type=Path, help="also write a temporal slice strip (input, restored) PNG")
    restore.add_argument("--allow-mismatch", action="store_true")

    evaluate_parser = commands.add_parser("eval", help="evaluate restorers on the test split")
    _add_common(evaluate_parser)
    _add_restorer_options(evaluate_parser, allow_all=True)
    evaluate_parser.add_argument("--allow-mismatch", action="store_true", help="skip config hash checks")
    evaluate_parser.add_argument("--bypass", action="store_true", help="score the LQ inputs only")
    evaluate_parser.add_argument(
        "--seeds", type=int, nargs="+", help="with --priors all, repeat the ablation for every seed under seed_<n>/"
    )
    evaluate_parser.add_argument(
        "--variants",
        nargs="+",
        choices=[v.value for v in FusionVariant],
        help="with --priors all, the fusion variants of the both-priors mode",
    )
    evaluate_parser.add_argument(
        "--train",
        action="store_true",
        help="with --priors all, train Stage 2 of every run first, and with --seeds any missing upstream stage",
    )

    check = commands.add_parser("check", help="run property checks")
    check.add_argument("suite", nargs="?", default=CheckSuite.ALL.value, choices=[s.value for s in CheckSuite])
    check.add_argument("--workers", type=int, default=1)
    check.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    commands.add_parser("config-schema", help="print the JSON schema of run configs")

    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Loads --config (or the defaults) and applies the command line overrides"""
    config = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    document = json.loads(config.json())

    if getattr(args, "seed", None) is not None:
        seed = args.seed
        document["seed"] = seed
        document["dataset"]["seed"] = seed
        document["dataset"]["degradation"]["seed"] = seed
        document["prior"]["seed"] = seed
        document["restorer"]["seed"] = seed
    if getattr(args, "out", None) is not None:
        document["output_dir"] = str(args.out)
    if getattr(args, "workers", None) is not None and args.command == "gen-data":
        document["dataset"]["workers"] = args.workers
    if getattr(args, "tstar", None) is not None:
        document["restorer"]["t_star"] = args.tstar
    if getattr(args, "priors", None) not in (None, ALL_PRIORS):
        document["restorer"]["fusion"]["prior_mode"] = args.priors
    if getattr(args, "variant", None) is not None:
        document["restorer"]["fusion"]["variant"] = args.variant

    return RunConfig.parse_obj(document)


def _restore(config: RunConfig, args: argparse.Namespace) -> None:
    clip = VideoClip(frames=read_array(args.input), name=args.input.stem)
    restorer = load_restorer(config, allow_mismatch=args.allow_mismatch)
    stdc = load_stdc(config, allow_mismatch=args.allow_mismatch) if restorer.fusion is not None else None

    restored = one_step_restore(clip, restorer, stdc)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    write_array(args.output, restored.frames)
    log.info(f"restored {args.input} -> {args.output}")

    if args.strip is not None:
        temporal_slice_strip([clip, restored], args.strip)


def _evaluate(config: RunConfig, args: argparse.Namespace) -> None:
    if args.bypass:
        evaluate(config, load_dataset(config.dataset_path), bypass=True, label="lq").write(config.reports_path)
    elif args.priors == ALL_PRIORS:
        run_ablation(config, train=args.train, variants=args.variants, seeds=args.seeds)
    else:
        evaluate_checkpoints(config, allow_mismatch=args.allow_mismatch)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "config-schema":
        print(RunConfig.schema_json(indent=2))
        return 0

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    if args.command == "check":
        report = run_checks(CheckSuite(args.suite), workers=args.workers)
        for failure in report.failures:
            print(f"FAILED {failure.name}: {failure.detail}", file=sys.stderr)
        return 0 if report.passed else 1

    try:
        config = resolve_config(args)
        log.info(f"config hash {config.config_hash}")

        if args.command == "gen-data":
            save_dataset(generate_dataset(config.dataset), config.dataset_path)
        elif args.command == "train-stage0":
            train_stage0(config, resume=args.resume)
        elif args.command == "train-stage1":
            train_stage1(config, resume=args.resume)
        elif args.command == "train-stage1p":
            train_stage1p(config, resume=args.resume)
        elif args.command == "train-stage2":
            train_stage2(config, resume=args.resume)
        elif args.command == "restore":
            _restore(config, args)
        elif args.command == "eval":
            _evaluate(config, args)
    except DualPriorError as e:
        log.error(e.message)
        return 1
    except ValidationError as e:
        log.error(f"invalid config: {e}")
        return 1

    return 0


if __name__ == "__main__":
    sys.exit(main())
