"""Study data model and the harmonic mean chi-squared statistic.

The statistic for z-scores ``z_1, ..., z_n`` and optional positive weights
``w_i`` is::

    X_w^2 = (sum_i sqrt(w_i))^2 / sum_i (w_i / z_i^2)

which reduces to ``n^2 / sum_i 1/z_i^2`` for equal weights. Under the null
hypothesis it is chi-squared with one degree of freedom whatever the weights,
and the one-sided overall p-value for all-positive z-scores is
``(1 - Phi(x)) / 2^(n-1)`` with ``x = sqrt(X_w^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from ._validation import check_positive, check_same_length, check_vector
from .numerics import DomainError, normal_isf, normal_sf

__all__ = [
    "Inequality",
    "Study",
    "StudySet",
    "CombinationResult",
    "SignificanceSpec",
    "METHODS",
    "z_from_p",
    "p_from_z",
    "harmonic_stat",
    "harmonic_stat_weighted",
    "harmonic_stat_effect_form",
    "harmonic_p_from_stat",
    "harmonic_p_value",
    "critical_value",
]

METHODS = (
    "harmonic",
    "harmonic_weighted",
    "fisher",
    "stouffer",
    "stouffer_weighted",
    "two_trials",
    "fixed_effects_meta",
)

Z_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Inequality:
    """A p-value known only to exceed ``gt``."""

    gt: float

    def __str__(self):
        return f"> {self.gt:g}"

    def to_json(self):
        return {"gt": self.gt}


PValue = Union[float, Inequality]


def z_from_p(p):
    """One-sided p-value to z-score, ``Phi^{-1}(1 - p)``."""
    return normal_isf(p)


def p_from_z(z):
    """z-score to one-sided p-value, ``1 - Phi(z)``."""
    return normal_sf(z)


@dataclass(frozen=True)
class Study:
    """Evidence from a single study.

    ``z`` is oriented so that positive values favour the hypothesised
    direction. ``effect`` and ``se`` live on the analysis scale (e.g. log
    hazard ratio) and keep whatever sign convention the source uses.
    """

    id: str
    p_one_sided: Optional[float] = None
    z: Optional[float] = None
    effect: Optional[float] = None
    se: Optional[float] = None
    weight: Optional[float] = None
    sample_size: Optional[int] = None

    def __post_init__(self):
        if self.p_one_sided is None and self.z is None:
            raise ValueError(f"study {self.id}: need a one-sided p-value or a z-score")
        if self.p_one_sided is not None and not 0 < self.p_one_sided < 1:
            raise ValueError(f"study {self.id}: p-value {self.p_one_sided} outside (0, 1)")
        if self.z is not None and not math.isfinite(self.z):
            raise ValueError(f"study {self.id}: z must be finite")
        if self.p_one_sided is not None and self.z is not None:
            derived = z_from_p(self.p_one_sided)
            if abs(derived - self.z) > Z_TOLERANCE:
                raise ValueError(
                    f"study {self.id}: z={self.z} disagrees with p={self.p_one_sided} "
                    f"(implies z={derived:.6g}); supply only one of them"
                )
        if self.se is not None and not self.se > 0:
            raise ValueError(f"study {self.id}: standard error must be positive")
        if self.weight is not None and not self.weight > 0:
            raise ValueError(f"study {self.id}: weight must be positive")
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError(f"study {self.id}: sample size must be at least 1")

    @property
    def z_score(self) -> float:
        if self.z is not None:
            return float(self.z)
        return z_from_p(self.p_one_sided)

    @property
    def p_value(self) -> float:
        if self.p_one_sided is not None:
            return float(self.p_one_sided)
        return p_from_z(self.z)

    @property
    def wald_z(self) -> Optional[float]:
        if self.effect is None or self.se is None:
            return None
        return self.effect / self.se


@dataclass(frozen=True)
class StudySet:
    """Ordered, non-empty collection of studies."""

    studies: tuple
    direction: str = "benefit_is_positive_z"

    def __post_init__(self):
        object.__setattr__(self, "studies", tuple(self.studies))
        if not self.studies:
            raise ValueError("a study set needs at least one study")
        ids = [s.id for s in self.studies]
        if len(set(ids)) != len(ids):
            raise ValueError("study ids must be unique")
        has_w = [s.weight is not None for s in self.studies]
        if any(has_w) and not all(has_w):
            raise ValueError("weights must be given for all studies or for none")

    @classmethod
    def from_pvalues(cls, ps, weights=None, ids=None):
        ps = list(ps)
        ids = ids or [str(i + 1) for i in range(len(ps))]
        weights = weights if weights is not None else [None] * len(ps)
        check_same_length(ps, weights, ids, names=("p-values", "weights", "ids"))
        return cls(tuple(Study(str(i), p_one_sided=float(p), weight=w) for i, p, w in zip(ids, ps, weights)))

    @classmethod
    def from_z(cls, zs, weights=None, ids=None):
        zs = list(zs)
        ids = ids or [str(i + 1) for i in range(len(zs))]
        weights = weights if weights is not None else [None] * len(zs)
        check_same_length(zs, weights, ids, names=("z-scores", "weights", "ids"))
        return cls(tuple(Study(str(i), z=float(z), weight=w) for i, z, w in zip(ids, zs, weights)))

    def __len__(self):
        return len(self.studies)

    def __iter__(self):
        return iter(self.studies)

    def __getitem__(self, key):
        if isinstance(key, str):
            for s in self.studies:
                if s.id == key:
                    return s
            raise KeyError(key)
        return self.studies[key]

    @property
    def n(self) -> int:
        return len(self.studies)

    @property
    def ids(self) -> list:
        return [s.id for s in self.studies]

    @property
    def z(self) -> np.ndarray:
        return np.array([s.z_score for s in self.studies])

    @property
    def p(self) -> np.ndarray:
        return np.array([s.p_value for s in self.studies])

    @property
    def weights(self) -> Optional[np.ndarray]:
        if self.studies[0].weight is None:
            return None
        return np.array([s.weight for s in self.studies])

    def _field(self, name):
        values = [getattr(s, name) for s in self.studies]
        missing = [s.id for s, v in zip(self.studies, values) if v is None]
        if missing:
            raise ValueError(f"studies {missing} lack the field {name!r}")
        return np.array(values, dtype=float)

    @property
    def effects(self) -> np.ndarray:
        return self._field("effect")

    @property
    def ses(self) -> np.ndarray:
        return self._field("se")

    def with_weights(self, weights) -> "StudySet":
        """Copy with explicit weights, ``None`` to drop them."""
        if weights is None:
            return StudySet(tuple(replace(s, weight=None) for s in self.studies), self.direction)
        w = check_positive(weights, "weights")
        check_same_length(w, self.studies, names=("weights", "studies"))
        return StudySet(
            tuple(replace(s, weight=float(wi)) for s, wi in zip(self.studies, w)), self.direction
        )

    def with_inverse_variance_weights(self) -> "StudySet":
        return self.with_weights(1.0 / self.ses**2)


@dataclass(frozen=True)
class CombinationResult:
    """Outcome of one combination method applied to ``n`` studies."""

    method: str
    p_overall: PValue
    n: int
    statistic: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def is_inequality(self) -> bool:
        return isinstance(self.p_overall, Inequality)

    def decide(self, level: float) -> bool:
        """Approval at one-sided ``level``; an inequality result never approves."""
        if self.is_inequality:
            return False
        return self.p_overall <= level


@dataclass(frozen=True)
class SignificanceSpec:
    """Overall one-sided level ``alpha_H`` for ``n`` studies."""

    alpha_H: float
    n: int

    def __post_init__(self):
        if self.n < 1 or int(self.n) != self.n:
            raise ValueError("n must be a positive integer")
        if not 0 < self.alpha_H < 1:
            raise DomainError("alpha_H must lie in (0, 1)")
        if not 2 ** (self.n - 1) * self.alpha_H < 0.5:
            raise DomainError(
                f"alpha_H={self.alpha_H:g} is not below 1/2^n = {0.5 ** self.n:g}; "
                "no critical value exists"
            )

    @property
    def c_H(self) -> float:
        return critical_value(self)


def harmonic_stat(zs) -> float:
    """``n^2 / sum 1/z_i^2``; zero if any z-score is exactly zero."""
    z = check_vector(zs, "z-scores")
    if np.any(z == 0):
        return 0.0
    n = len(z)
    return float(n * n / np.sum(1.0 / z**2))


def harmonic_stat_weighted(zs, ws) -> float:
    """``(sum sqrt(w_i))^2 / sum w_i/z_i^2``; zero if any z-score is zero."""
    z = check_vector(zs, "z-scores")
    w = check_positive(ws, "weights")
    check_same_length(z, w, names=("z-scores", "weights"))
    if np.any(z == 0):
        return 0.0
    return float(np.sum(np.sqrt(w)) ** 2 / np.sum(w / z**2))


def harmonic_stat_effect_form(effects, ses) -> float:
    """Precision-weighted statistic written through the effect estimates.

    ``(sum 1/se_i)^2 / n * theta_H^2`` where ``theta_H^2`` is the harmonic
    mean of the squared effects. Algebraically identical to
    ``harmonic_stat_weighted(effects/ses, 1/ses**2)``.
    """
    theta = check_vector(effects, "effects")
    se = check_positive(ses, "standard errors")
    check_same_length(theta, se, names=("effects", "standard errors"))
    if np.any(theta == 0):
        return 0.0
    n = len(theta)
    theta_h2 = n / np.sum(1.0 / theta**2)
    return float(np.sum(1.0 / se) ** 2 * theta_h2 / n)


def harmonic_p_from_stat(x2: float, n: int) -> float:
    """One-sided overall p-value ``(1 - Phi(sqrt(x2))) / 2^(n-1)``."""
    return normal_sf(math.sqrt(x2)) / 2 ** (n - 1)


def harmonic_p_value(studies: StudySet, weighted: Optional[bool] = None) -> CombinationResult:
    """Overall one-sided p-value of the harmonic mean chi-squared test.

    Uses the set's weights when present (``weighted=None``); pass
    ``weighted=False`` to force the unweighted statistic. If any z-score is
    not positive the p-value is reported as the inequality ``> 1/2^n``.
    """
    z = studies.z
    n = len(z)
    w = studies.weights
    if weighted and w is None:
        raise ValueError("weighted statistic requested but the studies carry no weights")
    use_w = w is not None and weighted is not False
    x2 = harmonic_stat_weighted(z, w) if use_w else harmonic_stat(z)
    method = "harmonic_weighted" if use_w else "harmonic"
    if np.all(z > 0):
        p = harmonic_p_from_stat(x2, n)
    else:
        p = Inequality(0.5**n)
    return CombinationResult(method, p, n, statistic=x2)


def critical_value(spec: SignificanceSpec) -> float:
    """``c_H = [Phi^{-1}(1 - 2^(n-1) alpha_H)]^2``."""
    return normal_isf(2 ** (spec.n - 1) * spec.alpha_H) ** 2
