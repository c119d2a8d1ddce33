from typing import Any, Dict, Tuple, Union

import numpy as np
import torch

RawState = Dict[str, Any]

# channels-last video (B, T, H, W, C)
VideoTensor = torch.Tensor

# latent grid (B, t, h, w, d)
LatentGrid = torch.Tensor

# integer code indices (B, t, h, w)
CodeIndexGrid = torch.Tensor

# flow displacements (..., H, W, 2) ordered (dx, dy)
FlowTensor = torch.Tensor

ArrayLike = Union[np.ndarray, torch.Tensor]

GridShape = Tuple[int, int, int]
