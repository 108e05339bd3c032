"""Global motion estimation by gray projection.

The global motion vector (gx, gy) is defined so that the current frame at
(x, y) matches the previous frame at (x + gx, y + gy), the convention used
by the MB difference in :mod:`rbrc.regions`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_SEARCH_RANGE = 16


@dataclass(frozen=True)
class GlobalMotionVector:
    gx: int = 0
    gy: int = 0

    def __neg__(self):
        return GlobalMotionVector(-self.gx, -self.gy)

    def as_tuple(self):
        return (self.gx, self.gy)


@dataclass(frozen=True)
class ProjectionCurves:
    row_proj: np.ndarray
    col_proj: np.ndarray


def project(frame) -> ProjectionCurves:
    luma = np.asarray(getattr(frame, "luma", frame), dtype=np.float64)
    return ProjectionCurves(row_proj=luma.mean(axis=1), col_proj=luma.mean(axis=0))


def _candidate_order(search_range: int):
    # smaller |offset| first, negative before positive on equal magnitude
    yield 0
    for m in range(1, search_range + 1):
        yield -m
        yield m


def match_curves(cur: np.ndarray, prev: np.ndarray, search_range: int) -> int:
    """Offset ``s`` minimizing mean |cur[t] - prev[t + s]| over the overlap."""
    n = len(cur)
    search_range = min(search_range, n - 1)
    best, best_cost = 0, np.inf
    for s in _candidate_order(search_range):
        if s >= 0:
            a, b = cur[:n - s], prev[s:]
        else:
            a, b = cur[-s:], prev[:n + s]
        cost = np.abs(a - b).mean()
        if cost < best_cost:
            best, best_cost = s, cost
    return best


def estimate_gmv(cur, prev, search_range: int = DEFAULT_SEARCH_RANGE) -> GlobalMotionVector:
    if search_range < 0:
        raise ValueError("search_range must be >= 0")
    if search_range == 0:
        return GlobalMotionVector(0, 0)
    pc, pp = project(cur), project(prev)
    if pc.row_proj.shape != pp.row_proj.shape or pc.col_proj.shape != pp.col_proj.shape:
        raise ValueError("frames must have identical dimensions")
    gx = match_curves(pc.col_proj, pp.col_proj, search_range)
    gy = match_curves(pc.row_proj, pp.row_proj, search_range)
    return GlobalMotionVector(int(gx), int(gy))
