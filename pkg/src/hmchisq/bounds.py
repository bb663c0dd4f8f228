"""Necessary and sufficient bounds on study-specific one-sided p-values."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List

from .core import SignificanceSpec, critical_value
from .numerics import normal_sf, sigma_level

__all__ = [
    "BoundsRow",
    "necessary_bound",
    "sufficient_bound",
    "bounds_table",
    "format_sig",
    "TABLE_ALPHAS",
    "TABLE_NS",
    "sigma_level",
]

# two-trials rule, four-sigma and five-sigma levels
TABLE_ALPHAS = (1 / 1600, 1 / 31574, 1 / 3488556)
TABLE_NS = (2, 3, 4, 5, 6)


@dataclass(frozen=True)
class BoundsRow:
    alpha_H: float
    n: int
    necessary: float
    sufficient: float

    def as_dict(self):
        return {"alpha_H": self.alpha_H, "n": self.n, "necessary": self.necessary, "sufficient": self.sufficient}


def necessary_bound(spec: SignificanceSpec) -> float:
    """Largest p_i for which overall success is still possible.

    A study above ``1 - Phi(sqrt(c_H)/n)`` rules out ``p_H <= alpha_H`` no
    matter how small the other p-values are.
    """
    if spec.n == 1:
        return spec.alpha_H
    return normal_sf(math.sqrt(critical_value(spec)) / spec.n)


def sufficient_bound(spec: SignificanceSpec) -> float:
    """If every p_i is at most ``1 - Phi(sqrt(c_H/n))`` the test succeeds."""
    if spec.n == 1:
        return spec.alpha_H
    return normal_sf(math.sqrt(critical_value(spec) / spec.n))


def bounds_table(alphas: Iterable[float] = TABLE_ALPHAS, ns: Iterable[int] = TABLE_NS) -> List[BoundsRow]:
    rows = []
    for a in alphas:
        for n in ns:
            spec = SignificanceSpec(a, n)
            rows.append(BoundsRow(a, n, necessary_bound(spec), sufficient_bound(spec)))
    return rows


def format_sig(x: float, digits: int = 2) -> str:
    """Round to ``digits`` significant digits, always in positional notation."""
    if x == 0:
        return "0"
    decimals = max(digits - 1 - math.floor(math.log10(abs(x))), 0)
    return f"{round(x, decimals):.{decimals}f}"
