"""Region-based basic-unit rate control for a small H.264-style block codec.

The package splits each P-frame into moving, complex and flat regions,
fits linear rate and distortion models per region, picks region QPs with an
exact dynamic-programming solver and closes the loop through a toy codec.
"""

from .allocator import solve_qp, solve_qp_t1, solve_qp_t2
from .config import RunConfig
from .controller import RunResult, encode_sequence
from .yuv_io import FrameY, VideoSpec, load_sequence

__all__ = [
    "FrameY", "RunConfig", "RunResult", "VideoSpec", "encode_sequence", "load_sequence",
    "solve_qp", "solve_qp_t1", "solve_qp_t2",
]
__version__ = "0.1.0"
