from .block_match import block_match_flow, candidate_displacements
from .warp import sampling_grid, warp, warp_array
