"""Monte Carlo checks of the null distribution of the harmonic statistic.

If ``Z ~ N(0, 1)`` then ``1/Z^2`` is standard Levy, and a positively
weighted sum ``sum w_i / Z_i^2`` of independent copies is
``Levy(0, (sum sqrt(w_i))^2)``. Rescaling gives a chi-squared(1) statistic
for any ``n`` and any weights. The functions here simulate that chain and
measure the Kolmogorov-Smirnov distance to chi-squared(1).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ._validation import check_positive
from .core import SignificanceSpec, critical_value
from .numerics import RngStream, chisq_isf, chisq_sf

__all__ = [
    "CalibrationReport",
    "sample_levy",
    "sample_inverse_gamma",
    "levy_cdf",
    "ks_threshold",
    "ks_distance",
    "verify_null_unweighted",
    "verify_null_weighted",
    "verify_null_dependent",
    "levy_sum_stability",
    "empirical_type_one_error",
    "TAIL_PROBES",
]

TAIL_PROBES = (0.1, 0.01, 0.001)
CHUNK = 1 << 20


@dataclass
class CalibrationReport:
    n_sims: int
    n_studies: int
    ks_distance: float
    ks_threshold: float
    tail_error_at: Dict[str, float]
    tail_mc_se: Dict[str, float]
    seed: int
    stream_id: int = 0
    weights: Optional[list] = None
    rho: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.ks_distance < self.ks_threshold

    def as_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def sample_levy(rng: RngStream, c: float, n: int) -> np.ndarray:
    """Draws from ``Levy(0, c)`` as ``c / Z^2``."""
    if not c > 0:
        raise ValueError("scale c must be positive")
    z = rng.generator().standard_normal(n)
    return c / z**2


def sample_inverse_gamma(rng: RngStream, shape: float, scale: float, n: int) -> np.ndarray:
    """``IG(shape, scale)`` as the reciprocal of ``Gamma(shape, rate=scale)``."""
    return 1.0 / rng.generator().gamma(shape, 1.0 / scale, n)


def levy_cdf(x, c: float = 1.0):
    """``P(Levy(0, c) <= x) = 2 (1 - Phi(sqrt(c/x)))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = chisq_sf(c / x[pos], 1)
    return out


def ks_threshold(n_sims: int) -> float:
    """Asymptotic 95% band for the one-sample KS distance."""
    return 1.36 / math.sqrt(n_sims)


def _chisq1_cdf(x):
    return 1.0 - chisq_sf(np.maximum(x, 0.0), 1)


def ks_distance(sample) -> float:
    """KS distance between ``sample`` and chi-squared(1)."""
    return float(stats.kstest(sample, _chisq1_cdf).statistic)


def _tail_errors(x2):
    n = len(x2)
    errors, ses = {}, {}
    for prob in TAIL_PROBES:
        q = chisq_isf(prob, 1)
        emp = np.count_nonzero(x2 >= q) / n
        errors[f"{prob:g}"] = (emp - prob) / prob
        ses[f"{prob:g}"] = math.sqrt(prob * (1 - prob) / n) / prob
    return errors, ses


def _statistic(z, weights):
    if weights is None:
        n = z.shape[1]
        return n * n / np.sum(1.0 / z**2, axis=1)
    w = np.asarray(weights, dtype=float)
    return np.sum(np.sqrt(w)) ** 2 / np.sum(w / z**2, axis=1)


def _report(x2, n_studies, rng, weights=None, rho=None):
    errors, ses = _tail_errors(x2)
    return CalibrationReport(
        n_sims=len(x2),
        n_studies=n_studies,
        ks_distance=ks_distance(x2),
        ks_threshold=ks_threshold(len(x2)),
        tail_error_at=errors,
        tail_mc_se=ses,
        seed=int(rng.seed),
        stream_id=int(rng.stream_id),
        weights=None if weights is None else [float(w) for w in weights],
        rho=rho,
    )


def _check_sims(n_sims):
    if n_sims < 10**5:
        raise ValueError("calibration needs at least 10^5 simulations")


def verify_null_unweighted(n_studies: int, n_sims: int, rng: RngStream) -> CalibrationReport:
    """Simulate ``n^2 / sum 1/Z_i^2`` under the null and compare with chi-squared(1)."""
    _check_sims(n_sims)
    z = rng.generator().standard_normal((n_sims, n_studies))
    return _report(_statistic(z, None), n_studies, rng)


def verify_null_weighted(weights: Sequence[float], n_sims: int, rng: RngStream) -> CalibrationReport:
    """As :func:`verify_null_unweighted` for the weighted statistic.

    Uses the same draws as the unweighted check for a given ``rng``, so equal
    weights reproduce it stream for stream.
    """
    _check_sims(n_sims)
    w = check_positive(weights, "weights")
    z = rng.generator().standard_normal((n_sims, len(w)))
    return _report(_statistic(z, w), len(w), rng, weights=w)


def verify_null_dependent(rho: float, n_studies: int, n_sims: int, rng: RngStream) -> CalibrationReport:
    """Null check with exchangeable correlation ``rho`` between the z-scores."""
    _check_sims(n_sims)
    if not -1 < rho < 1:
        raise ValueError("rho must lie in (-1, 1)")
    corr = np.full((n_studies, n_studies), rho)
    np.fill_diagonal(corr, 1.0)
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        raise ValueError(
            f"equicorrelation {rho} is not positive definite for n={n_studies} "
            f"(need rho > {-1 / (n_studies - 1):g})"
        ) from None
    z = rng.generator().standard_normal((n_sims, n_studies)) @ chol.T
    return _report(_statistic(z, None), n_studies, rng, rho=rho)


def levy_sum_stability(n_studies: int, n_draws: int, rng: RngStream) -> float:
    """KS distance of ``(Y_1 + ... + Y_n)/n^2`` to the standard Levy law."""
    y = sample_levy(rng, 1.0, n_draws * n_studies).reshape(n_draws, n_studies)
    s = y.sum(axis=1) / n_studies**2
    return float(stats.kstest(s, levy_cdf).statistic)


def empirical_type_one_error(
    alpha_H: float,
    n_studies: int,
    n_sims: int,
    rng: RngStream,
    weights: Optional[Sequence[float]] = None,
) -> Tuple[float, float]:
    """Null rejection rate of ``p_H <= alpha_H`` and its MC standard error.

    ``p_H <= alpha_H`` is evaluated as "all z positive and statistic at least
    c_H", processed in chunks of independent substreams.
    """
    c = critical_value(SignificanceSpec(alpha_H, n_studies))
    hits = 0
    done = 0
    i = 0
    while done < n_sims:
        size = min(CHUNK, n_sims - done)
        z = rng.substream(i).generator().standard_normal((size, n_studies))
        x2 = _statistic(z, weights)
        hits += int(np.count_nonzero(np.all(z > 0, axis=1) & (x2 >= c)))
        done += size
        i += 1
    rate = hits / n_sims
    return rate, math.sqrt(alpha_H * (1 - alpha_H) / n_sims)
