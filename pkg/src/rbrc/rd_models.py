"""Per-region linear rate/QS and distortion/QS models.

    rate = a * MAD / QS + b        (bits per MB, texture + header)
    dist = c * QS + d              (MSE per MB)

Parameters are refit by ordinary least squares over a sliding window of
observations after every coded frame.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .regions import REGIONS, DiffMap, RegionMap

DEFAULT_WINDOW = 20


class ModelDomainError(ValueError):
    pass


@dataclass(frozen=True)
class RegionModel:
    a: float
    b: float
    c: float
    d: float
    r: int = 0

    @classmethod
    def initial(cls, bpp_target: float, r: int = 0) -> "RegionModel":
        return cls(a=2000.0 * bpp_target, b=0.0, c=4.0, d=0.0, r=r)


@dataclass(frozen=True)
class RegionObservation:
    frame: int
    r: int
    qs: float
    mad: float
    rate: float
    dist: float


class ModelWindow:
    """Ring buffer of the most recent observations, one per region."""

    def __init__(self, size: int = DEFAULT_WINDOW):
        if size < 1:
            raise ValueError("window size must be >= 1")
        self.size = size
        self._obs = {r: deque(maxlen=size) for r in REGIONS}

    def add(self, obs: RegionObservation) -> None:
        self._obs.setdefault(obs.r, deque(maxlen=self.size)).append(obs)

    def get(self, r: int) -> list[RegionObservation]:
        return list(self._obs.get(r, ()))

    def __len__(self):
        return sum(len(v) for v in self._obs.values())


def region_mad(diff: DiffMap, regions: RegionMap, r: int) -> float:
    sel = regions.label == r
    if not sel.any():
        return 0.0
    return float(diff.diff[sel].mean())


def predict_rate(model: RegionModel, mad: float, qs: float) -> float:
    if qs <= 0:
        raise ModelDomainError(f"qs must be > 0, got {qs}")
    return max(0.0, model.a * mad / qs + model.b)


def predict_dist(model: RegionModel, qs: float) -> float:
    if qs <= 0:
        raise ModelDomainError(f"qs must be > 0, got {qs}")
    return max(0.0, model.c * qs + model.d)


def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """OLS slope/intercept with the degenerate and negative-slope rules."""
    ybar = float(y.mean())
    if np.unique(x).size < 2:
        return 0.0, ybar
    xbar = x.mean()
    dx = x - xbar
    slope = float((dx * (y - ybar)).sum() / (dx * dx).sum())
    if slope < 0:
        return 0.0, ybar
    return slope, float(ybar - slope * xbar)


def _arrays(obs):
    qs = np.array([o.qs for o in obs], dtype=np.float64)
    mad = np.array([o.mad for o in obs], dtype=np.float64)
    rate = np.array([o.rate for o in obs], dtype=np.float64)
    dist = np.array([o.dist for o in obs], dtype=np.float64)
    return qs, mad, rate, dist


def refit(window: ModelWindow, r: int, model: RegionModel | None = None) -> RegionModel | None:
    """Least-squares refit of region ``r``; an empty window returns ``model``."""
    obs = window.get(r)
    if not obs:
        return model
    qs, mad, rate, dist = _arrays(obs)
    a, b = _line_fit(mad / qs, rate)
    c, d = _line_fit(qs, dist)
    return RegionModel(a=a, b=b, c=c, d=d, r=r)


def r_squared(window: ModelWindow, model: RegionModel, which: str = "rate") -> float:
    obs = window.get(model.r)
    if len(obs) < 2:
        raise ModelDomainError("r_squared needs at least two observations")
    qs, mad, rate, dist = _arrays(obs)
    if which == "rate":
        x, y, slope, icpt = mad / qs, rate, model.a, model.b
    elif which == "dist":
        x, y, slope, icpt = qs, dist, model.c, model.d
    else:
        raise ValueError(f"which must be 'rate' or 'dist', got {which!r}")
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        return 1.0
    ss_res = float(((y - (slope * x + icpt)) ** 2).sum())
    return min(1.0, max(0.0, 1.0 - ss_res / ss_tot))


def with_region(model: RegionModel, r: int) -> RegionModel:
    return replace(model, r=r)
