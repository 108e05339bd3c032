"""Region-adjusted Lagrange multipliers for mode decision and motion search."""

from __future__ import annotations

import math
from dataclasses import dataclass

ALPHA_DEFAULT = 0.85
A_EPS = 1e-6


@dataclass(frozen=True)
class LagrangeSet:
    lambda_mode: tuple
    lambda_me: tuple
    beta: tuple = (1.0, 1.0, 1.0)
    delta: tuple = (0.0, 0.0, 0.0)


def lambda_org(qp: float, alpha: float = ALPHA_DEFAULT) -> float:
    return alpha * 2.0 ** ((qp - 12) / 3.0)


def delta(models) -> tuple:
    """|c / a| per region, with a zero R-QS slope replaced by ``A_EPS``."""
    return tuple(abs(m.c / m.a) if m.a != 0 else abs(m.c) / A_EPS for m in models)


def beta(counts, deltas) -> tuple:
    w = [n * dl for n, dl in zip(counts, deltas)]
    total = sum(w)
    if total > 0:
        return tuple(x / total for x in w)
    n_total = sum(counts)
    if n_total == 0:
        return (0.0,) * len(counts)
    return tuple(n / n_total for n in counts)


def adjust_lambda(qp, betas, alpha: float = ALPHA_DEFAULT) -> LagrangeSet:
    modes = []
    for q, b in zip(qp, betas):
        org = lambda_org(q, alpha)
        modes.append(b * org if b > 0 else org)
    return LagrangeSet(lambda_mode=tuple(modes),
                       lambda_me=tuple(math.sqrt(m) for m in modes),
                       beta=tuple(betas))


def original_lambda(qp, alpha: float = ALPHA_DEFAULT) -> LagrangeSet:
    """Unadjusted multipliers, used by T1 and the baselines."""
    modes = tuple(lambda_org(q, alpha) for q in qp)
    return LagrangeSet(lambda_mode=modes, lambda_me=tuple(math.sqrt(m) for m in modes))
