"""Special functions, quantiles, root finding and seeded random streams.

The normal and chi-squared functions are thin wrappers around
``scipy.special`` (Cephes) so that the rest of the package can work with
scalars or arrays transparently and get consistent domain checking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

__all__ = [
    "DomainError",
    "BracketError",
    "ConvergenceError",
    "normal_cdf",
    "normal_sf",
    "normal_quantile",
    "normal_isf",
    "chisq_sf",
    "chisq_quantile",
    "chisq_isf",
    "sigma_level",
    "find_root",
    "RngStream",
    "standard_normal_sample",
]


class DomainError(ValueError):
    """Argument outside the domain of a distribution function."""


class BracketError(ValueError):
    """Function values at the bracket ends do not differ in sign."""


class ConvergenceError(RuntimeError):
    """Root finder hit its iteration cap; ``bracket`` holds the best interval."""

    def __init__(self, message, bracket):
        super().__init__(message)
        self.bracket = bracket


def _out(value):
    # scalars in, Python floats out
    if np.ndim(value) == 0:
        return float(value)
    return value


def _check_open_unit(p, name="p"):
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise DomainError(f"{name} must lie in the open interval (0, 1), got {p!r}")
    return arr


def normal_cdf(x):
    """Standard normal distribution function."""
    return _out(special.ndtr(np.asarray(x, dtype=float)))


def normal_sf(x):
    """Upper tail ``1 - Phi(x)``, computed without cancellation."""
    return _out(special.ndtr(-np.asarray(x, dtype=float)))


def normal_quantile(p):
    """Inverse of :func:`normal_cdf` on (0, 1)."""
    return _out(special.ndtri(_check_open_unit(p)))


def normal_isf(q):
    """Inverse of :func:`normal_sf`: returns ``x`` with ``1 - Phi(x) = q``.

    Preferred over ``normal_quantile(1 - q)`` for tiny ``q`` such as
    ``1/3488556`` where ``1 - q`` would lose digits.
    """
    return _out(-special.ndtri(_check_open_unit(q, "q")))


def _check_df(df):
    if int(df) != df or df < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {df!r}")
    return int(df)


def chisq_sf(x, df):
    """Survival function of the chi-squared distribution.

    For ``df == 1`` this is evaluated as ``2 * (1 - Phi(sqrt(x)))`` which keeps
    the normal/chi-squared identity exact to rounding.
    """
    df = _check_df(df)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"x must be non-negative, got {x!r}")
    if df == 1:
        return _out(2.0 * special.ndtr(-np.sqrt(arr)))
    return _out(special.gammaincc(df / 2.0, arr / 2.0))


def chisq_isf(q, df):
    """Value ``x`` with ``chisq_sf(x, df) = q``."""
    df = _check_df(df)
    q = _check_open_unit(q, "q")
    if df == 1:
        return _out(special.ndtri(q / 2.0) ** 2)
    return _out(special.chdtri(df, q))


def chisq_quantile(p, df):
    """Quantile function: ``chisq_sf(chisq_quantile(p, df), df) = 1 - p``."""
    p = _check_open_unit(p)
    return chisq_isf(1.0 - p, df)


def sigma_level(k):
    """Significance level of the k-sigma rule, ``1 - Phi(k)``."""
    return normal_sf(k)


def find_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> float:
    """Bisection root finder on a sign-changing bracket.

    Returns the midpoint of a final bracket whose width is at most ``tol``
    (or an exact zero if one is hit). Deterministic for a given ``f``.
    """
    if not lo < hi:
        raise BracketError(f"need lo < hi, got [{lo}, {hi}]")
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return float(lo)
    if fhi == 0:
        return float(hi)
    if math.isnan(flo) or math.isnan(fhi) or (flo > 0) == (fhi > 0):
        raise BracketError(
            f"f(lo)={flo!r} and f(hi)={fhi!r} do not bracket a root on [{lo}, {hi}]"
        )
    for _ in range(max_iter):
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket is down to adjacent floats
            return mid
        fmid = f(mid)
        if fmid == 0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    if hi - lo <= tol:
        return 0.5 * (lo + hi)
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations; best bracket [{lo}, {hi}]",
        (lo, hi),
    )


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Substreams are derived through :class:`numpy.random.SeedSequence` spawn
    keys, so ``RngStream(s, i).substream(j)`` never collides with
    ``RngStream(s, k)`` for any ``k``.
    """

    seed: int
    stream_id: int = 0
    path: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.stream_id < 0:
            raise ValueError("stream_id must be non-negative")

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),) + self.path)
        return np.random.Generator(np.random.PCG64(seq))


def standard_normal_sample(rng: RngStream, n: int) -> np.ndarray:
    """``n`` i.i.d. standard normal variates from a fresh generator on ``rng``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return rng.generator().standard_normal(n)
