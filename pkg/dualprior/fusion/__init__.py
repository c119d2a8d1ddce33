from .attention import CrossRefine, flatten_grid
from .models import FusionConfig
from .modulation import ModulationNet, ModulationParams, apply_modulation
from .module import FusionBlock, FusionContext, PriorFusion, fuse
