from .exceptions import (
    CapacityError,
    CheckpointError,
    CodeIndexError,
    ConfigHashMismatchError,
    ConfigurationError,
    CorruptFileError,
    DatasetNotFoundError,
    DivergenceError,
    DualPriorError,
    FreezeViolationError,
    IntegrityError,
    OneStepContractError,
    ShapeError,
)
