from typing import Any, Dict, Optional


class DualPriorError(Exception):
    """
    Base error for the package.
    error.context carries structured details (file names, offending dimensions, ...) when available.
    """

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self._message = message
        self._context = context or {}

    @property
    def message(self) -> str:
        return self._message

    @property
    def context(self) -> Dict[str, Any]:
        return self._context


class ConfigurationError(DualPriorError, ValueError):
    """Invalid configuration or motion parameters"""

    pass


class ShapeError(DualPriorError, ValueError):
    """
    Array or tensor shapes are incompatible.
    error.dimension names the offending dimension when one can be singled out.
    """

    def __init__(self, message: str, dimension: Optional[str] = None, **context):
        super().__init__(message, dict(context, dimension=dimension))
        self._dimension = dimension

    @property
    def dimension(self) -> Optional[str]:
        return self._dimension


class CapacityError(DualPriorError):
    """A token sequence exceeds the configured maximum"""

    pass


class CodeIndexError(DualPriorError, IndexError):
    """Code indices outside [0, K)"""

    pass


class DatasetNotFoundError(DualPriorError, FileNotFoundError):
    """A dataset directory, manifest or array file does not exist"""

    def __init__(self, path: Any):
        super().__init__(f"no such dataset file or directory: {path}", {"path": str(path)})
        self.filename = str(path)


class IntegrityError(DualPriorError):
    """Stored checksum does not match the file contents"""

    def __init__(self, path: Any, expected: str, actual: str):
        super().__init__(
            f"checksum mismatch for {path}: expected {expected}, got {actual}",
            {"path": str(path), "expected": expected, "actual": actual},
        )


class CorruptFileError(DualPriorError):
    """A binary array or checkpoint file cannot be decoded"""

    def __init__(self, path: Any, reason: str):
        super().__init__(
            f"corrupt file {path}: {reason}", {"path": str(path), "reason": reason}
        )


class CheckpointError(DualPriorError):
    """A checkpoint is missing, of the wrong kind, or lacks required entries"""

    pass


class ConfigHashMismatchError(CheckpointError):
    """A checkpoint was produced under a different configuration"""

    def __init__(self, expected: str, actual: str, source: Optional[str] = None):
        super().__init__(
            f"config hash mismatch{f' in {source}' if source else ''}: expected {expected}, got {actual}",
            {"expected": expected, "actual": actual, "source": source},
        )


class DivergenceError(DualPriorError):
    """Training loss became non-finite"""

    pass


class FreezeViolationError(DualPriorError):
    """A parameter group that must stay frozen changed during training"""

    pass


class OneStepContractError(DualPriorError):
    """Restoration evaluated the velocity network a number of times other than one"""

    pass
