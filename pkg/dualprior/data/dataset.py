import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from ..common.arrays import file_checksum, read_array, write_array
from ..common.constants import DATASET_FORMAT_VERSION, MANIFEST_FILENAME
from ..common.enums import Split
from ..common.exceptions import CorruptFileError, DatasetNotFoundError, IntegrityError
from .degradation import degrade
from .models import (
    ClipRecord,
    DatasetConfig,
    DatasetItem,
    DatasetManifest,
    FileRecord,
    FlowFieldSequence,
    ToyDataset,
    VideoClip,
)
from .synthesis import make_toy_clip, random_motion

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

_ARRAY_FILES = ("hq", "lq", "flow_fw", "flow_bw")


def generate_item(config: DatasetConfig, index: int) -> DatasetItem:
    """Builds the index-th item of a dataset. Items are independent, so any subset can be regenerated alone."""
    split = Split.TRAIN if index < config.num_train else Split.TEST
    motion = random_motion(config.seed, index, config.max_speed, config.height)

    hq, flows = make_toy_clip(
        motion,
        config.frames,
        config.height,
        config.width,
        seed=config.seed,
        index=index,
        name=f"{split.value}_{index:04d}",
    )
    lq = degrade(hq, config.degradation, clip_index=index)

    return DatasetItem(hq=hq, lq=lq, flows=flows, motion=motion, split=split)


def generate_dataset(config: DatasetConfig) -> ToyDataset:
    """Generates paired HQ/LQ toy clips with their analytic flows.

    Args:
        config (DatasetConfig): Sizes, seed and degradation settings. With workers > 1 items are generated in a thread
          pool; the result does not depend on the worker count.

    Returns:
        ToyDataset: num_train training items followed by num_test test items
    """
    total = config.num_train + config.num_test
    log.info(
        f"generating {total} clips ({config.num_train} train, {config.num_test} test) of "
        f"{config.frames}x{config.height}x{config.width}, seed {config.seed}"
    )

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            items = list(pool.map(lambda i: generate_item(config, i), range(total)))
    else:
        items = [generate_item(config, i) for i in range(total)]

    return ToyDataset(items=items, config=config)


def save_dataset(dataset: ToyDataset, path: PathLike) -> Path:
    """Writes a dataset directory: manifest.json plus one binary array file per clip and flow.

    Args:
        dataset (ToyDataset): The dataset to write.
        path (PathLike): Target directory, created if missing.

    Returns:
        Path: The manifest path
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    records = []
    for item in dataset.items:
        clip_dir = root / item.name
        clip_dir.mkdir(exist_ok=True)

        arrays = {
            "hq": item.hq.frames,
            "lq": item.lq.frames,
            "flow_fw": item.flows.forward,
            "flow_bw": item.flows.backward,
        }
        files = {}
        for key, array in arrays.items():
            relative = f"{item.name}/{key}.arr"
            digest = write_array(root / relative, array)
            files[key] = FileRecord(path=relative, sha256=digest, shape=list(array.shape))

        records.append(
            ClipRecord(
                name=item.name,
                split=item.split,
                shape=list(item.hq.shape),
                motion=item.motion,
                degradation=item.lq.degradation,
                files=files,
            )
        )

    manifest = DatasetManifest(version=DATASET_FORMAT_VERSION, config=dataset.config, clips=records)
    manifest_path = root / MANIFEST_FILENAME
    manifest_path.write_text(manifest.json(indent=2))

    log.info(f"saved {len(records)} clips to {root}")

    return manifest_path


def _load_verified(root: Path, record: FileRecord):
    path = root / record.path
    if not path.is_file():
        raise DatasetNotFoundError(path)

    actual = file_checksum(path)
    if actual != record.sha256:
        raise IntegrityError(path, record.sha256, actual)

    array = read_array(path)
    if list(array.shape) != record.shape:
        raise CorruptFileError(path, f"shape {list(array.shape)} differs from manifest {record.shape}")

    return array


def load_dataset(path: PathLike) -> ToyDataset:
    """Loads a dataset written by save_dataset, verifying every file checksum.

    Args:
        path (PathLike): The dataset directory.

    Raises:
        DatasetNotFoundError: If the directory, manifest or an array file is missing.
        IntegrityError: If a file's checksum differs from the manifest.
        CorruptFileError: If the manifest version or a file's contents are invalid.

    Returns:
        ToyDataset: The loaded dataset
    """
    root = Path(path)
    manifest_path = root / MANIFEST_FILENAME
    if not manifest_path.is_file():
        raise DatasetNotFoundError(manifest_path if root.is_dir() else root)

    try:
        manifest = DatasetManifest.parse_file(manifest_path)
    except ValidationError as e:
        raise CorruptFileError(manifest_path, str(e)) from e

    if manifest.version != DATASET_FORMAT_VERSION:
        raise CorruptFileError(manifest_path, f"unsupported dataset version {manifest.version}")

    items = []
    for record in manifest.clips:
        missing = [key for key in _ARRAY_FILES if key not in record.files]
        if missing:
            raise CorruptFileError(manifest_path, f"clip {record.name} lacks {', '.join(missing)}")

        arrays = {key: _load_verified(root, record.files[key]) for key in _ARRAY_FILES}
        lq_name = f"{record.name}_lq"

        items.append(
            DatasetItem(
                hq=VideoClip(frames=arrays["hq"], name=record.name),
                lq=VideoClip(frames=arrays["lq"], name=lq_name, degradation=record.degradation),
                flows=FlowFieldSequence(forward=arrays["flow_fw"], backward=arrays["flow_bw"]),
                motion=record.motion,
                split=record.split,
            )
        )

    log.info(f"loaded {len(items)} clips from {root}")

    return ToyDataset(items=items, config=manifest.config)
