"""Two-sided p-value function and confidence intervals by test inversion.

For a hypothesised common effect ``mu`` the study statistics are shifted to
``(effect_i - mu) / se_i``. When they all share a sign the two-sided p-value
is twice the one-sided harmonic p-value; otherwise only the inequality
``> 1/2^(n-1)`` is reported. The confidence set at level ``gamma`` is every
``mu`` whose two-sided p-value exceeds ``1 - gamma``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Tuple, Union

import numpy as np

from .core import Inequality, Study, StudySet
from .numerics import BracketError, find_root, normal_sf

__all__ = [
    "ConfidenceInterval",
    "PValueFunction",
    "MultipleCrossingWarning",
    "shifted_z",
    "two_sided_p",
    "two_sided_p_values",
    "confidence_interval",
    "p_value_curve",
]

GRID_POINTS = 512
WINDOW_SES = 20.0


class MultipleCrossingWarning(UserWarning):
    """The p-value function crosses the target level more than once on one side."""


def shifted_z(study: Study, mu: float) -> float:
    """``(effect - mu) / se`` for the point null ``theta = mu``."""
    if study.effect is None or study.se is None:
        raise ValueError(f"study {study.id} needs an effect estimate and a standard error")
    return (study.effect - mu) / study.se


def _weights_or_ones(studies: StudySet) -> np.ndarray:
    w = studies.weights
    return np.ones(studies.n) if w is None else w


def two_sided_p_values(effects, ses, weights, mus) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised two-sided p-values over a grid of ``mu``.

    Returns ``(p, is_inequality)``; ``p`` is NaN wherever the shifted
    statistics disagree in sign. A shifted statistic that is exactly zero
    gives the limiting value ``1/2^(n-1)``.
    """
    theta = np.asarray(effects, dtype=float)
    se = np.asarray(ses, dtype=float)
    w = np.asarray(weights, dtype=float)
    mus = np.atleast_1d(np.asarray(mus, dtype=float))
    n = len(theta)
    z = (theta[None, :] - mus[:, None]) / se[None, :]
    has_pos = np.any(z > 0, axis=1)
    has_neg = np.any(z < 0, axis=1)
    mixed = has_pos & has_neg
    any_zero = np.any(z == 0, axis=1)
    with np.errstate(divide="ignore"):
        denom = np.sum(w[None, :] / z**2, axis=1)
    stat = np.where(any_zero, 0.0, np.sum(np.sqrt(w)) ** 2 / np.where(any_zero, 1.0, denom))
    p = 2.0 * normal_sf(np.sqrt(stat)) / 2 ** (n - 1)
    p = np.where(mixed, np.nan, p)
    return p, mixed


def two_sided_p(studies: StudySet, mu: float) -> Union[float, Inequality]:
    """Two-sided harmonic mean p-value for ``H0: theta = mu``.

    Weighted with the set's weights when present.
    """
    p, mixed = two_sided_p_values(studies.effects, studies.ses, _weights_or_ones(studies), [mu])
    if mixed[0]:
        return Inequality(0.5 ** (studies.n - 1))
    return float(p[0])


@dataclass(frozen=True)
class ConfidenceInterval:
    level: float
    lower: float
    upper: float
    scale: str = "analysis"
    warnings: Tuple[str, ...] = ()

    def exponentiated(self) -> "ConfidenceInterval":
        if self.scale == "exponentiated":
            return self
        return ConfidenceInterval(self.level, math.exp(self.lower), math.exp(self.upper), "exponentiated", self.warnings)

    def as_dict(self):
        return {"level": self.level, "lower": self.lower, "upper": self.upper, "scale": self.scale}


@dataclass(frozen=True)
class PValueFunction:
    mu_grid: np.ndarray
    p_two_sided: List[Union[float, Inequality]]
    studies: StudySet = field(repr=False)

    @property
    def is_inequality(self) -> np.ndarray:
        return np.array([isinstance(p, Inequality) for p in self.p_two_sided])

    @property
    def values(self) -> np.ndarray:
        """Numeric p-values, with the inequality bound substituted where applicable."""
        return np.array([p.gt if isinstance(p, Inequality) else p for p in self.p_two_sided])

    def rows(self):
        for mu, p in zip(self.mu_grid, self.p_two_sided):
            ineq = isinstance(p, Inequality)
            yield float(mu), (p.gt if ineq else p), ineq


def _endpoint(f, grid, outermost_first, side, gamma):
    vals = f(grid)
    signs = vals > 0
    changes = np.nonzero(signs[:-1] != signs[1:])[0]
    if len(changes) == 0:
        raise BracketError(
            f"scan window [{grid[0]:.6g}, {grid[-1]:.6g}] does not bracket the {side} "
            f"endpoint at level {gamma}; widen the window"
        )
    idx = changes[0] if outermost_first else changes[-1]
    note = ()
    if len(changes) > 1:
        note = (f"{side} side: p-value function crosses {len(changes)} times; reporting the outermost",)
        warnings.warn(note[0], MultipleCrossingWarning, stacklevel=3)
    root = find_root(lambda m: float(f(np.array([m]))[0]), float(grid[idx]), float(grid[idx + 1]), tol=1e-12)
    return root, note


def confidence_interval(
    studies: StudySet,
    gamma: float,
    scale: str = "analysis",
    grid_points: int = GRID_POINTS,
    window: float = WINDOW_SES,
) -> ConfidenceInterval:
    """Invert the two-sided test at level ``gamma``.

    Each endpoint is bracketed by scanning ``grid_points`` values outward from
    the extreme effect estimate up to ``window`` times the largest standard
    error, then refined by bisection.
    """
    n = studies.n
    if not 1 - 0.5 ** (n - 1) < gamma < 1:
        raise ValueError(f"level must exceed 1 - 1/2^(n-1) = {1 - 0.5 ** (n - 1):g} for n={n}")
    if scale not in ("analysis", "exponentiated"):
        raise ValueError("scale must be 'analysis' or 'exponentiated'")
    theta, se, w = studies.effects, studies.ses, _weights_or_ones(studies)
    target = 1.0 - gamma

    def f(mus):
        p, mixed = two_sided_p_values(theta, se, w, mus)
        # inside the effect range the p-value exceeds 1/2^(n-1) > target
        return np.where(mixed, 1.0, p) - target

    reach = window * se.max()
    lo_grid = np.linspace(theta.min() - reach, theta.min(), grid_points + 1)
    hi_grid = np.linspace(theta.max(), theta.max() + reach, grid_points + 1)
    lower, note_lo = _endpoint(f, lo_grid, True, "lower", gamma)
    upper, note_hi = _endpoint(f, hi_grid, False, "upper", gamma)
    ci = ConfidenceInterval(gamma, lower, upper, "analysis", note_lo + note_hi)
    return ci.exponentiated() if scale == "exponentiated" else ci


def p_value_curve(studies: StudySet, mu_lo: float, mu_hi: float, points: int = 201) -> PValueFunction:
    """Two-sided p-value on a uniform grid of hypothesised effects."""
    if not mu_lo < mu_hi:
        raise ValueError("need mu_lo < mu_hi")
    if points < 2:
        raise ValueError("need at least two grid points")
    grid = np.linspace(mu_lo, mu_hi, points)
    p, mixed = two_sided_p_values(studies.effects, studies.ses, _weights_or_ones(studies), grid)
    bound = 0.5 ** (studies.n - 1)
    values = [Inequality(bound) if m else float(v) for v, m in zip(p, mixed)]
    return PValueFunction(grid, values, studies)
