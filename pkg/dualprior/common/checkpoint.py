import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Union

import msgpack
import numpy as np
import torch

from .arrays import decode_array, encode_array
from .constants import CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC
from .exceptions import (
    CheckpointError,
    ConfigHashMismatchError,
    CorruptFileError,
    DatasetNotFoundError,
)
from .types import RawState

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

_ARRAY_KEY = "__array__"
_TENSOR_KEY = "__tensor__"
_TUPLE_KEY = "__tuple__"


def _pack(obj: Any) -> Any:
    """Recursively converts a state tree into msgpack-native values"""
    if isinstance(obj, torch.Tensor):
        return {_TENSOR_KEY: encode_array(obj.detach().cpu().numpy())}
    if isinstance(obj, np.ndarray):
        return {_ARRAY_KEY: encode_array(obj)}
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, dict):
        return {key: _pack(value) for key, value in obj.items()}
    if isinstance(obj, tuple):
        return {_TUPLE_KEY: [_pack(value) for value in obj]}
    if isinstance(obj, list):
        return [_pack(value) for value in obj]

    return obj


def _unpack(obj: Any) -> Any:
    if isinstance(obj, dict):
        if _TENSOR_KEY in obj and len(obj) == 1:
            return torch.from_numpy(decode_array(obj[_TENSOR_KEY], "checkpoint tensor"))
        if _ARRAY_KEY in obj and len(obj) == 1:
            return decode_array(obj[_ARRAY_KEY], "checkpoint array")
        if _TUPLE_KEY in obj and len(obj) == 1:
            return tuple(_unpack(value) for value in obj[_TUPLE_KEY])
        return {key: _unpack(value) for key, value in obj.items()}
    if isinstance(obj, list):
        return [_unpack(value) for value in obj]

    return obj


class Checkpoint:
    """
    A versioned container for parameter arrays and metadata.

    Attributes:
        kind (str): What the checkpoint holds, ie "stdc", "vae", "restorer" or "train_state".
        config_hash (str): Hash of the RunConfig that produced it.
        state (RawState): Nested tree of tensors, arrays and plain values.
        meta (Dict[str, Any]): Free-form msgpack-serializable metadata.
    """

    def __init__(
        self,
        kind: str,
        config_hash: str,
        state: RawState,
        meta: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.kind = kind
        self.config_hash = config_hash
        self.state = state
        self.meta = meta or {}

    def to_bytes(self) -> bytes:
        document = {
            "kind": self.kind,
            "config_hash": self.config_hash,
            "meta": _pack(self.meta),
            "state": _pack(self.state),
        }

        return (
            CHECKPOINT_MAGIC
            + struct.pack("<B", CHECKPOINT_FORMAT_VERSION)
            + msgpack.packb(document, use_bin_type=True)
        )

    @classmethod
    def from_bytes(cls, payload: bytes, source: str = "<bytes>") -> "Checkpoint":
        offset = len(CHECKPOINT_MAGIC)
        if payload[:offset] != CHECKPOINT_MAGIC:
            raise CorruptFileError(source, "bad checkpoint magic bytes")

        if len(payload) <= offset:
            raise CorruptFileError(source, "truncated checkpoint header")

        (version,) = struct.unpack_from("<B", payload, offset)
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CorruptFileError(source, f"unsupported checkpoint version {version}")

        try:
            document = msgpack.unpackb(
                payload[offset + 1 :], raw=False, strict_map_key=False
            )
        except (ValueError, TypeError, msgpack.exceptions.UnpackException) as e:
            raise CorruptFileError(source, f"msgpack decode failed: {e}") from e

        if not isinstance(document, dict):
            raise CorruptFileError(source, "checkpoint document is not a map")

        missing = [key for key in ("kind", "config_hash", "state", "meta") if key not in document]
        if missing:
            raise CorruptFileError(source, f"checkpoint document lacks {', '.join(missing)}")

        return cls(
            kind=document["kind"],
            config_hash=document["config_hash"],
            state=_unpack(document["state"]),
            meta=_unpack(document["meta"]),
        )

    def save(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        log.info(f"saved {self.kind} checkpoint to {path}")

        return path

    @classmethod
    def load(
        cls,
        path: PathLike,
        kind: Optional[str] = None,
        config_hash: Optional[str] = None,
    ) -> "Checkpoint":
        """Loads a checkpoint, optionally validating its kind and config hash.

        Args:
            path (PathLike): The checkpoint file.
            kind (Optional[str]): The expected kind. Defaults to None (no check).
            config_hash (Optional[str]): The expected config hash. Defaults to None (no check).

        Raises:
            DatasetNotFoundError: If the file does not exist.
            CheckpointError: If the kind does not match.
            ConfigHashMismatchError: If the config hash does not match.

        Returns:
            Checkpoint: The loaded checkpoint
        """
        path = Path(path)
        if not path.is_file():
            raise DatasetNotFoundError(path)

        checkpoint = cls.from_bytes(path.read_bytes(), source=str(path))

        if kind is not None and checkpoint.kind != kind:
            raise CheckpointError(
                f"{path} holds a {checkpoint.kind} checkpoint, expected {kind}",
                {"path": str(path), "kind": checkpoint.kind},
            )

        if config_hash is not None and checkpoint.config_hash != config_hash:
            raise ConfigHashMismatchError(config_hash, checkpoint.config_hash, str(path))

        return checkpoint


def module_state(module: torch.nn.Module) -> RawState:
    return {name: tensor.detach().cpu().clone() for name, tensor in module.state_dict().items()}


def load_module_state(module: torch.nn.Module, state: RawState) -> None:
    missing, unexpected = module.load_state_dict(
        {name: torch.as_tensor(value) for name, value in state.items()}, strict=False
    )
    if missing or unexpected:
        raise CheckpointError(
            f"state does not match {type(module).__name__}",
            {"missing": list(missing), "unexpected": list(unexpected)},
        )
