"""Division of a frame's MBs into moving, complex and flat regions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .motion import GlobalMotionVector
from .yuv_io import MbGrid, mb_means

MR, COMPLEX, FLAT = 1, 2, 3
REGIONS = (MR, COMPLEX, FLAT)
REGION_NAMES = {MR: "MR", COMPLEX: "Complex", FLAT: "Flat"}

TH1_DEFAULT = 0.75
TH2_DEFAULT = 0.5

W_CENTRAL, W_TRANSITION, W_BORDER = 1.0, 0.55, 0.1


@dataclass(frozen=True)
class DiffMap:
    diff: np.ndarray

    @property
    def diff_avg(self) -> float:
        return float(self.diff.mean())


@dataclass(frozen=True)
class RegionMap:
    label: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        """N_r for r = MR, Complex, Flat."""
        return np.array([(self.label == r).sum() for r in REGIONS], dtype=np.int64)

    def members(self, r: int) -> np.ndarray:
        return np.flatnonzero(self.label == r)

    @classmethod
    def uniform(cls, mb_count: int, r: int = COMPLEX) -> "RegionMap":
        return cls(np.full(mb_count, r, dtype=np.int8))


def shifted_reference(prev: np.ndarray, gmv: GlobalMotionVector) -> np.ndarray:
    """prev sampled at (x + gx, y + gy), edge-clamped outside the frame."""
    h, w = prev.shape
    rows = np.clip(np.arange(h) + gmv.gy, 0, h - 1)
    cols = np.clip(np.arange(w) + gmv.gx, 0, w - 1)
    return prev[np.ix_(rows, cols)]


def compute_diff(cur, prev, gmv: GlobalMotionVector = GlobalMotionVector()) -> DiffMap:
    cur = np.asarray(getattr(cur, "luma", cur), dtype=np.float64)
    prev = np.asarray(getattr(prev, "luma", prev), dtype=np.float64)
    if cur.shape != prev.shape:
        raise ValueError("frames must have identical dimensions")
    ref = shifted_reference(prev, gmv)
    return DiffMap(mb_means(np.abs(cur - ref)))


def strip_widths(grid: MbGrid) -> tuple[int, int]:
    """(border, transition) strip widths in MBs.

    One and two MBs at QCIF (11x9), doubled at CIF (22x18); other sizes scale
    with the short side of the grid.
    """
    border = max(1, int(round(min(grid.mbs_x, grid.mbs_y) / 9)))
    return border, max(2, 2 * border)


def location_weights(grid: MbGrid) -> np.ndarray:
    border, transition = strip_widths(grid)
    ys, xs = np.divmod(np.arange(grid.mb_count), grid.mbs_x)
    edge = np.minimum.reduce([xs, grid.mbs_x - 1 - xs, ys, grid.mbs_y - 1 - ys])
    w = np.full(grid.mb_count, W_CENTRAL)
    w[edge < border + transition] = W_TRANSITION
    w[edge < border] = W_BORDER
    return w


def extract_mr(diff: DiffMap, weights: np.ndarray, th1: float = TH1_DEFAULT) -> np.ndarray:
    avg = diff.diff_avg
    if avg <= 0:
        return np.zeros(diff.diff.shape, dtype=bool)
    return weights * diff.diff / avg > th1


def subdivide_non_mr(prev_mse, mr_flags: np.ndarray, th2: float = TH2_DEFAULT) -> RegionMap:
    """Label non-MR MBs Complex or Flat from the previous frame's per-MB MSE.

    ``prev_mse=None`` (no coded P-frame yet) labels every non-MR MB Complex.
    """
    mr_flags = np.asarray(mr_flags, dtype=bool)
    label = np.full(mr_flags.shape, COMPLEX, dtype=np.int8)
    if prev_mse is not None:
        prev_mse = np.asarray(prev_mse, dtype=np.float64)
        avg = prev_mse.mean()
        if avg <= 0:
            label[:] = FLAT
        else:
            label[prev_mse / avg <= th2] = FLAT
    label[mr_flags] = MR
    return RegionMap(label)


def divide(cur, prev, gmv, prev_mse, th1=TH1_DEFAULT, th2=TH2_DEFAULT):
    """Region division for one P-frame; returns (DiffMap, RegionMap)."""
    diff = compute_diff(cur, prev, gmv)
    grid = MbGrid.for_shape(np.shape(getattr(cur, "luma", cur)))
    mr = extract_mr(diff, location_weights(grid), th1)
    return diff, subdivide_non_mr(prev_mse, mr, th2)


def region_pgm(regions: RegionMap, grid: MbGrid, scale: int = 16) -> bytes:
    """Binary PGM of the label map: MR 255, Complex 128, Flat 0."""
    gray = np.zeros(regions.label.shape, dtype=np.uint8)
    gray[regions.label == MR] = 255
    gray[regions.label == COMPLEX] = 128
    img = gray.reshape(grid.mbs_y, grid.mbs_x).repeat(scale, 0).repeat(scale, 1)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    return header + img.tobytes()
