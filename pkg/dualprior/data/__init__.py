from .models import (
    ClipRecord,
    DatasetConfig,
    DatasetItem,
    DatasetManifest,
    DegradationLog,
    DegradeConfig,
    FileRecord,
    FlowFieldSequence,
    MotionSpec,
    ToyDataset,
    VideoClip,
)
from .synthesis import analytic_flows, make_toy_clip, random_motion, validate_motion
from .degradation import block_dct_compress, degrade, quantization_table, sample_degradation
from .dataset import generate_dataset, generate_item, load_dataset, save_dataset
