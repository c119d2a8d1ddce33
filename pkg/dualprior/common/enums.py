from enum import Enum

import numpy as np


class MotionKind(str, Enum):
    """The family of analytic viewport motion used to synthesize a toy clip."""

    STATIC = "static"
    TRANSLATE = "translate"
    ROTATE = "rotate"
    SCALE = "scale"
    COMPOSITE = "composite"


class BackgroundKind(str, Enum):
    """Texture drawn behind the face-like composite."""

    FLAT = "flat"
    STRIPES = "stripes"
    CHECKER = "checker"
    WAVES = "waves"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


class CodebookKind(str, Enum):
    """
    Selects one of the two codebooks of the prior extractor.

    Attributes:
        SPATIAL: Codebook queried by the spatial path, capturing per-frame appearance.
        TEMPORAL: Codebook queried by the temporal interaction path, capturing motion dynamics.
    """

    SPATIAL = "spatial"
    TEMPORAL = "temporal"


class PriorMode(str, Enum):
    """
    Which priors are injected into the velocity network.

    Attributes:
        NONE: Fusion disabled, the backbone runs on the null text condition alone.
        SPATIAL: Only the spatial prior, injected as a projected token residual.
        TEMPORAL: Only the temporal prior, through the shared modulation.
        BOTH: Both priors through the configured FusionVariant.
    """

    NONE = "none"
    SPATIAL = "spatial"
    TEMPORAL = "temporal"
    BOTH = "both"

    @property
    def uses_spatial(self) -> bool:
        return self in (PriorMode.SPATIAL, PriorMode.BOTH)

    @property
    def uses_temporal(self) -> bool:
        return self in (PriorMode.TEMPORAL, PriorMode.BOTH)


class FusionVariant(str, Enum):
    """
    Fusion module designs. Only ASYMMETRIC is the supported path, the others exist for ablations.

    Attributes:
        ASYMMETRIC: Shared (gamma, beta) from the temporal prior plus temporally queried cross-attention
          over the spatial prior.
        INDEPENDENT_MODULATION: Like ASYMMETRIC but every block owns its modulation MLP.
        SIMPLE_SPATIAL: Shared modulation, spatial prior injected directly without temporal pre-refinement.
        SYMMETRIC: Both priors projected and added to the tokens in the same way, no modulation.
    """

    ASYMMETRIC = "asymmetric"
    INDEPENDENT_MODULATION = "independent_modulation"
    SIMPLE_SPATIAL = "simple_spatial"
    SYMMETRIC = "symmetric"


class Stage(str, Enum):
    """Training stages, in the order they run."""

    STAGE0 = "stage0"
    STAGE1 = "stage1"
    STAGE1P = "stage1p"
    STAGE2 = "stage2"


class CEReduction(str, Enum):
    """
    How per-token cross-entropy terms are reduced over the t*h*w tokens of a clip.

    Attributes:
        SUM: Sum over tokens, mean over the batch.
        MEAN: Mean over tokens and batch.
    """

    SUM = "sum"
    MEAN = "mean"


class CheckSuite(str, Enum):
    """Groups of property checks run by the check runner."""

    ALGEBRA = "algebra"
    GRADIENTS = "gradients"
    ORACLES = "oracles"
    FREEZE = "freeze"
    TRANSPARENCY = "transparency"
    ALL = "all"


class DTypeCode(int, Enum):
    """dtype codes of the binary array layout"""

    FLOAT32 = 1
    FLOAT64 = 2
    INT64 = 3
    INT32 = 4
    UINT8 = 5
    BOOL = 6

    @property
    def numpy_dtype(self) -> str:
        return _NUMPY_DTYPES[self]

    @staticmethod
    def from_numpy(dtype) -> "DTypeCode":
        """
        Looks up the code for a numpy dtype.

        Args:
            dtype: Anything numpy.dtype accepts.

        Raises:
            ValueError: If the dtype has no code in the array layout.

        Returns:
            DTypeCode: The matching code
        """
        name = np.dtype(dtype).name
        for code, numpy_name in _NUMPY_DTYPES.items():
            if numpy_name == name:
                return code

        raise ValueError(f"dtype {name} is not supported by the array format")


_NUMPY_DTYPES = {
    DTypeCode.FLOAT32: "float32",
    DTypeCode.FLOAT64: "float64",
    DTypeCode.INT64: "int64",
    DTypeCode.INT32: "int32",
    DTypeCode.UINT8: "uint8",
    DTypeCode.BOOL: "bool",
}
