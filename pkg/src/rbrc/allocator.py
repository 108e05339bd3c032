"""Frame bit allocation, the region QS solver and QP bounding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QP_MIN, QP_MAX = 0, 51
_BASE_QS = (0.625, 0.6875, 0.8125, 0.875, 1.0, 1.125)

# max QP decrease / increase between frames, indexed MR, Complex, Flat
CLAMP_DOWN = (3, 3, 2)
CLAMP_UP = (2, 3, 3)

GAMMA = 0.5
MU_DEFAULT = 0.5


class SolverDomainError(ValueError):
    pass


def qs_ladder() -> np.ndarray:
    """QS for QP 0..51; doubles every 6 QP."""
    qp = np.arange(QP_MAX + 1)
    return np.array(_BASE_QS)[qp % 6] * 2.0 ** (qp // 6)


LADDER = qs_ladder()
LADDER.setflags(write=False)


def qs_from_qp(qp) -> np.ndarray | float:
    return LADDER[np.clip(qp, QP_MIN, QP_MAX)]


def qp_from_qs(qs: float) -> int:
    if qs <= 0:
        raise SolverDomainError(f"qs must be > 0, got {qs}")
    # argmin returns the first (smallest QP) of equally distant entries
    return int(np.argmin(np.abs(LADDER - qs)))


def bootstrap_qp(bpp: float) -> int:
    """Starting QP from the target bits per pixel."""
    if bpp < 0.1:
        return 40
    if bpp < 0.3:
        return 34
    if bpp < 0.6:
        return 28
    return 24


@dataclass
class BufferState:
    size: float
    fullness: float = 0.0
    target_level: float | None = None
    clamp_events: int = 0

    def __post_init__(self):
        if self.target_level is None:
            self.target_level = self.size / 2

    def update(self, bits: float, drain: float) -> bool:
        """Add a coded frame and drain one frame interval; True if clamped."""
        level = self.fullness + bits - drain
        clamped = level < 0 or level > self.size
        self.fullness = min(max(level, 0.0), self.size)
        if clamped:
            self.clamp_events += 1
        return clamped


@dataclass(frozen=True)
class FrameBudget:
    R_k: float
    RM_k: float
    NF_k: int


def allocate_frame_bits(RM_k: float, NF_k: int, B_k: float, mu: float = MU_DEFAULT,
                        r_min: float = 0.0) -> FrameBudget:
    if NF_k < 1:
        raise SolverDomainError("NF_k must be >= 1")
    if not 0.0 <= mu <= 1.0:
        raise SolverDomainError(f"mu must lie in [0, 1], got {mu}")
    r = mu * RM_k / NF_k + (1.0 - mu) * B_k
    return FrameBudget(R_k=max(r, r_min), RM_k=RM_k, NF_k=NF_k)


def buffer_feedback(buf: BufferState, frame_rate: float, bitrate: float,
                    gamma: float = GAMMA) -> float:
    return max(0.0, bitrate / frame_rate + gamma * (buf.target_level - buf.fullness))


@dataclass(frozen=True)
class RateControlDecision:
    qp: tuple
    qs: tuple
    predicted_rate: float
    predicted_dist: float
    mode: str
    infeasible: bool = False
    raw_qp: tuple = field(default=None, compare=False)


def _region_tables(models, mads, counts, ladder):
    rates, dists = [], []
    for m, mad, n in zip(models, mads, counts):
        rates.append(n * np.maximum(0.0, m.a * mad / ladder + m.b))
        dists.append(n * np.maximum(0.0, m.c * ladder + m.d))
    return rates, dists


def _pareto(rate, dist, *payload):
    """Drop states beaten or equalled in both rate and distortion by another."""
    order = np.lexsort((dist, rate))
    rate, dist = rate[order], dist[order]
    best_before = np.minimum.accumulate(np.concatenate(([np.inf], dist[:-1])))
    keep = dist < best_before
    return (rate[keep], dist[keep]) + tuple(p[order][keep] for p in payload)


def _solve(models, mads, counts, R_k, ladder, monotone):
    counts = [int(n) for n in counts]
    if len(counts) != 3 or len(models) != 3 or len(mads) != 3:
        raise SolverDomainError("solver expects exactly three regions")
    if min(counts) < 0:
        raise SolverDomainError("region counts must be >= 0")
    active = [i for i, n in enumerate(counts) if n > 0]
    if not active:
        raise SolverDomainError("all region counts are zero")
    ladder = np.asarray(ladder, dtype=np.float64)
    L = len(ladder)
    rates, dists = _region_tables(models, mads, counts, ladder)

    # states: accumulated rate, accumulated distortion, chosen index per region
    first = active[0]
    s_rate, s_dist = rates[first].copy(), dists[first].copy()
    s_idx = np.zeros((L, 3), dtype=np.int64)
    s_idx[:, first] = np.arange(L)
    s_last = np.arange(L)

    for r in active[1:]:
        if monotone:
            # prefix fronts: best states whose last index is <= j
            fronts = []
            cur = (np.empty(0), np.empty(0), np.empty((0, 3), np.int64))
            for j in range(L):
                sel = s_last == j
                cur = _pareto(np.concatenate((cur[0], s_rate[sel])),
                              np.concatenate((cur[1], s_dist[sel])),
                              np.concatenate((cur[2], s_idx[sel])))
                fronts.append(cur)
            parts = []
            for j in range(L):
                fr, fd, fi = fronts[j]
                idx = fi.copy()
                idx[:, r] = j
                parts.append((fr + rates[r][j], fd + dists[r][j], idx, np.full(len(fr), j)))
            s_rate = np.concatenate([p[0] for p in parts])
            s_dist = np.concatenate([p[1] for p in parts])
            s_idx = np.concatenate([p[2] for p in parts])
            s_last = np.concatenate([p[3] for p in parts])
        else:
            fr, fd, fi = _pareto(s_rate, s_dist, s_idx)
            n = len(fr)
            s_rate = (fr[None, :] + rates[r][:, None]).ravel()
            s_dist = (fd[None, :] + dists[r][:, None]).ravel()
            s_idx = np.repeat(fi[None, :, :], L, axis=0).reshape(-1, 3).copy()
            s_idx[:, r] = np.repeat(np.arange(L), n)
            s_last = np.repeat(np.arange(L), n)

    feasible = s_rate <= R_k
    if not feasible.any():
        return None, active, rates, dists
    obj = np.where(feasible, s_dist, np.inf)
    best = obj.min()
    cand = np.flatnonzero(obj == best)
    # prefer the lexicographically smallest index triple among ties
    keys = s_idx[cand]
    pick = cand[np.lexsort(keys.T[::-1])[0]]
    return (s_idx[pick], float(s_rate[pick]), float(s_dist[pick])), active, rates, dists


def _fill_empty(qp_idx, active):
    out = list(qp_idx)
    for r in range(3):
        if r not in active:
            nearest = min(active, key=lambda a: (abs(a - r), a))
            out[r] = out[nearest]
    return out


def solve_qp(models, mads, counts, R_k, ladder=LADDER, monotone=False) -> RateControlDecision:
    """Minimize total predicted distortion subject to the frame bit budget.

    Dynamic programming over regions with Pareto-pruned (rate, distortion)
    states; with ``monotone`` the QS of successive nonempty regions must be
    non-decreasing (MR <= Complex <= Flat).
    """
    mode = "T2" if monotone else "T1"
    res, active, rates, dists = _solve(models, mads, counts, R_k, ladder, monotone)
    ladder = np.asarray(ladder)
    if res is None:
        top = len(ladder) - 1
        pr = sum(float(rates[r][top]) for r in active)
        pd = sum(float(dists[r][top]) for r in active)
        return RateControlDecision(qp=(QP_MAX,) * 3, qs=(float(ladder[top]),) * 3,
                                   predicted_rate=pr, predicted_dist=pd, mode=mode,
                                   infeasible=True)
    idx, pr, pd = res
    qp = _fill_empty([int(i) for i in idx], active)
    return RateControlDecision(qp=tuple(qp), qs=tuple(float(ladder[q]) for q in qp),
                               predicted_rate=pr, predicted_dist=pd, mode=mode)


def solve_qp_t1(models, mads, counts, R_k, ladder=LADDER) -> RateControlDecision:
    return solve_qp(models, mads, counts, R_k, ladder, monotone=False)


def solve_qp_t2(models, mads, counts, R_k, ladder=LADDER) -> RateControlDecision:
    return solve_qp(models, mads, counts, R_k, ladder, monotone=True)


def clamp_qp(raw_qp, prev_qp, down=CLAMP_DOWN, up=CLAMP_UP) -> tuple:
    return tuple(
        int(min(max(raw, prev - a, 1), prev + b, QP_MAX))
        for raw, prev, a, b in zip(raw_qp, prev_qp, down, up)
    )


def clamp_qp_monotone(raw_qp, prev_qp, down=CLAMP_DOWN, up=CLAMP_UP) -> tuple:
    """:func:`clamp_qp` followed by a repair that keeps QP non-decreasing.

    Independent per-region bounds can reorder a monotone solver output; the
    repair moves values only within their own bounds, which always admits a
    monotone choice when ``prev_qp`` is itself non-decreasing.
    """
    x = list(clamp_qp(raw_qp, prev_qp, down, up))
    lo = [max(p - a, 1) for p, a in zip(prev_qp, down)]
    hi = [min(p + b, QP_MAX) for p, b in zip(prev_qp, up)]
    for i in range(1, len(x)):
        x[i] = min(max(x[i], x[i - 1]), hi[i])
    for i in range(len(x) - 2, -1, -1):
        x[i] = max(min(x[i], x[i + 1]), lo[i])
    return tuple(int(v) for v in x)
