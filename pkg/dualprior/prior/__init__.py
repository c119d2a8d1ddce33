from .models import PriorConfig
from .network import (
    CodeIndices,
    CodePredictor,
    FrameDecoder,
    FrameEncoder,
    Priors,
    SpatialPath,
    StdcModel,
    StdcOutput,
    TemporalInteraction,
)
from .quantize import Codebook, Quantized, quantize
