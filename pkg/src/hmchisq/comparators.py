"""Competing approval rules and their operating characteristics.

Rules are evaluated on z-scores (``z_i = Phi^{-1}(1 - p_i)``) so that the
same vectorised ``approves`` method serves the decision functions, the
Monte Carlo power and Type I error estimates, and the rejection-region
curves. All approvals use non-strict inequalities (``p <= alpha``,
``statistic >= c``).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from ._validation import check_pvalues, check_positive, check_same_length, check_vector
from .core import CombinationResult, SignificanceSpec, critical_value, z_from_p
from .numerics import RngStream, chisq_isf, chisq_sf, normal_isf, normal_sf

__all__ = [
    "DecisionRule",
    "PowerSpec",
    "BoundaryPoint",
    "two_trials_decide",
    "two_trials_rule",
    "harmonic_rule",
    "liberal_harmonic_rule",
    "fisher_rule",
    "stouffer_rule",
    "fisher_combined",
    "stouffer_pooled",
    "fixed_effects_meta",
    "MetaAnalysisResult",
    "conditional_power",
    "conditional_power_curve",
    "project_power",
    "project_power_table",
    "monte_carlo_rate",
    "type_one_error",
    "rejection_boundary",
    "equal_p_boundary",
    "TABLE2_POWERS",
]

TWO_TRIALS_ALPHA = 0.025
TABLE2_POWERS = (0.70, 0.80, 0.90, 0.95)
RULE_KINDS = ("two_trials", "harmonic_controlled", "harmonic_liberal", "fisher", "stouffer", "stouffer_weighted")


def two_trials_decide(p1: float, p2: float, alpha: float = TWO_TRIALS_ALPHA) -> bool:
    """Both trials significant at one-sided ``alpha``."""
    check_pvalues([p1, p2])
    return bool(p1 <= alpha and p2 <= alpha)


# -- combination tests -------------------------------------------------------


def fisher_combined(ps) -> CombinationResult:
    """Fisher's method: ``-2 sum log p_i`` against chi-squared with 2n df."""
    p = check_pvalues(ps)
    stat = float(-2.0 * np.sum(np.log(p)))
    return CombinationResult("fisher", chisq_sf(stat, 2 * len(p)), len(p), statistic=stat)


def stouffer_pooled(ps, ws=None) -> CombinationResult:
    """Stouffer's z-method, optionally weighted.

    The weighted statistic is ``sum sqrt(w_i) z_i / sqrt(sum w_i)``. With
    ``w_i = 1/se_i^2`` it equals the z-statistic of a fixed-effects
    meta-analysis of the effects ``z_i * se_i``.
    """
    p = check_pvalues(ps)
    z = z_from_p(p)
    if ws is None:
        stat = float(np.sum(z) / math.sqrt(len(z)))
        return CombinationResult("stouffer", normal_sf(stat), len(p), statistic=stat)
    w = check_positive(ws, "weights")
    check_same_length(p, w, names=("p-values", "weights"))
    stat = float(np.sum(np.sqrt(w) * z) / math.sqrt(np.sum(w)))
    return CombinationResult("stouffer_weighted", normal_sf(stat), len(p), statistic=stat)


@dataclass(frozen=True)
class MetaAnalysisResult:
    estimate: float
    se: float
    ci: Tuple[float, float]
    p_two_sided: float
    level: float = 0.95
    n: int = 1

    @property
    def z(self) -> float:
        return self.estimate / self.se

    def exponentiated(self) -> Tuple[float, float, float]:
        """Estimate and interval on the ratio scale (e.g. hazard ratio)."""
        return math.exp(self.estimate), math.exp(self.ci[0]), math.exp(self.ci[1])

    def as_result(self) -> CombinationResult:
        return CombinationResult(
            "fixed_effects_meta",
            self.p_two_sided,
            self.n,
            statistic=self.z,
            extra={"estimate": self.estimate, "se": self.se, "ci": list(self.ci)},
        )


def fixed_effects_meta(effects, ses, level: float = 0.95) -> MetaAnalysisResult:
    """Inverse-variance fixed-effects pooling with a Wald interval."""
    theta = check_vector(effects, "effects")
    se = check_positive(ses, "standard errors")
    check_same_length(theta, se, names=("effects", "standard errors"))
    w = 1.0 / se**2
    est = float(np.sum(w * theta) / np.sum(w))
    pooled_se = float(1.0 / math.sqrt(np.sum(w)))
    q = normal_isf((1 - level) / 2)
    p = 2.0 * normal_sf(abs(est) / pooled_se)
    return MetaAnalysisResult(est, pooled_se, (est - q * pooled_se, est + q * pooled_se), p, level, len(theta))


# -- decision rules ----------------------------------------------------------


@dataclass(frozen=True)
class DecisionRule:
    """An approval rule for ``n_studies`` one-sided results.

    ``level`` is the rule's Type I error. ``params`` carries whatever the rule
    needs at decision time (critical values, thresholds, weights).
    """

    kind: str
    level: float
    params: Dict[str, object] = field(default_factory=dict)
    n_studies: int = 2
    name: str = ""

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    def approves(self, z) -> np.ndarray:
        """Vectorised approval for z-scores of shape ``(..., n_studies)``."""
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.n_studies:
            raise ValueError(f"expected {self.n_studies} z-scores per row, got {z.shape[-1]}")
        k = self.kind
        if k == "two_trials":
            return np.all(z >= self.params["z_threshold"], axis=-1)
        if k in ("harmonic_controlled", "harmonic_liberal"):
            n = self.n_studies
            with np.errstate(divide="ignore"):
                x2 = n * n / np.sum(1.0 / z**2, axis=-1)
            return np.all(z > 0, axis=-1) & (x2 >= self.params["critical_value"])
        if k == "fisher":
            stat = -2.0 * np.sum(special.log_ndtr(-z), axis=-1)
            return stat >= self.params["chisq_threshold"]
        # stouffer variants
        w = np.asarray(self.params.get("weights", np.ones(self.n_studies)), dtype=float)
        stat = np.sum(np.sqrt(w) * z, axis=-1) / math.sqrt(np.sum(w))
        return stat >= self.params["z_threshold"]

    def decide(self, ps) -> bool:
        p = check_pvalues(ps)
        return bool(self.approves(z_from_p(p)))


def two_trials_rule(alpha: float = TWO_TRIALS_ALPHA, n_studies: int = 2) -> DecisionRule:
    return DecisionRule(
        "two_trials",
        alpha**n_studies,
        {"per_trial_alpha": alpha, "z_threshold": normal_isf(alpha)},
        n_studies,
        "two-trials rule",
    )


def harmonic_rule(alpha_H: float = TWO_TRIALS_ALPHA**2, n_studies: int = 2) -> DecisionRule:
    """Harmonic mean chi-squared test with exact Type I error ``alpha_H``."""
    c = critical_value(SignificanceSpec(alpha_H, n_studies))
    return DecisionRule("harmonic_controlled", alpha_H, {"critical_value": c}, n_studies, "harmonic")


def liberal_harmonic_rule(per_trial_alpha: float = TWO_TRIALS_ALPHA) -> DecisionRule:
    """Two-study harmonic test whose sufficient bound equals ``per_trial_alpha``.

    The critical value solves ``1 - Phi(sqrt(c/2)) = per_trial_alpha``, so
    every two-trials approval is also a harmonic approval. The price is an
    inflated Type I error ``(1 - Phi(sqrt(c))) / 2``.
    """
    c = 2.0 * normal_isf(per_trial_alpha) ** 2
    type_one = normal_sf(math.sqrt(c)) / 2.0
    nominal = per_trial_alpha**2
    return DecisionRule(
        "harmonic_liberal",
        type_one,
        {"critical_value": c, "nominal_level": nominal, "inflation": type_one / nominal},
        2,
        "harmonic (liberal)",
    )


def fisher_rule(level: float = TWO_TRIALS_ALPHA**2, n_studies: int = 2) -> DecisionRule:
    q = chisq_isf(level, 2 * n_studies)
    return DecisionRule(
        "fisher",
        level,
        {"chisq_threshold": q, "product_threshold": math.exp(-q / 2.0)},
        n_studies,
        "combined (Fisher)",
    )


def stouffer_rule(level: float = TWO_TRIALS_ALPHA**2, n_studies: int = 2, weights=None) -> DecisionRule:
    params = {"z_threshold": normal_isf(level)}
    kind, name = "stouffer", "pooled (Stouffer)"
    if weights is not None:
        w = check_positive(weights, "weights")
        if len(w) != n_studies:
            raise ValueError("need one weight per study")
        params["weights"] = tuple(float(x) for x in w)
        kind, name = "stouffer_weighted", "pooled (Stouffer, weighted)"
    return DecisionRule(kind, level, params, n_studies, name)


def standard_rules(alpha_H: float = TWO_TRIALS_ALPHA**2) -> List[DecisionRule]:
    """The four rules compared in the project power table."""
    per_trial = math.sqrt(alpha_H)
    return [two_trials_rule(per_trial), harmonic_rule(alpha_H), fisher_rule(alpha_H), stouffer_rule(alpha_H)]


# -- conditional power -------------------------------------------------------


def _require_two(rule):
    if rule.n_studies != 2:
        raise ValueError("conditional power is defined for two-study rules only")


def conditional_power(rule: DecisionRule, p1: float) -> float:
    """Power of a replicate study given the first study's one-sided p-value.

    The replicate z-score is drawn as ``Normal(z_1, 1)``, i.e. the true
    effect is set to the one observed in the first study.
    """
    _require_two(rule)
    check_pvalues([p1])
    z1 = z_from_p(p1)
    k = rule.kind
    if k == "two_trials":
        alpha = rule.params["per_trial_alpha"]
        if p1 > alpha:
            return 0.0
        return normal_sf(rule.params["z_threshold"] - z1)
    if k in ("harmonic_controlled", "harmonic_liberal"):
        c = rule.params["critical_value"]
        # X^2 = 4/(1/z1^2 + 1/z2^2) >= c needs 1/z2^2 <= 4/c - 1/z1^2 with z2 > 0
        if z1 <= 0:
            return 0.0
        slack = 4.0 / c - 1.0 / z1**2
        if slack <= 0:
            return 0.0
        return normal_sf(slack**-0.5 - z1)
    if k == "fisher":
        ratio = rule.params["product_threshold"] / p1
        if ratio >= 1:
            return 1.0
        return normal_sf(-z1 - special.ndtri(ratio))
    w1, w2 = rule.params.get("weights", (1.0, 1.0))
    thr = (rule.params["z_threshold"] * math.sqrt(w1 + w2) - math.sqrt(w1) * z1) / math.sqrt(w2)
    return normal_sf(thr - z1)


def conditional_power_curve(rule: DecisionRule, grid) -> np.ndarray:
    return np.array([conditional_power(rule, float(p)) for p in check_pvalues(grid, "grid")])


# -- Monte Carlo -------------------------------------------------------------

CHUNK = 1 << 18


def _count_chunk(rules, mu, n_studies, rng, size):
    z = rng.generator().standard_normal((size, n_studies))
    z += mu
    return [int(np.count_nonzero(r.approves(z))) for r in rules]


def _mc_counts(rules, mu, n_sims, rng, n_jobs=1, chunk_size=CHUNK):
    # chunk i always draws from rng.substream(i): counts do not depend on n_jobs
    n_studies = rules[0].n_studies
    sizes = [chunk_size] * (n_sims // chunk_size)
    if n_sims % chunk_size:
        sizes.append(n_sims % chunk_size)
    jobs = [(rules, mu, n_studies, rng.substream(i), s) for i, s in enumerate(sizes)]
    if n_jobs == 1:
        results = [_count_chunk(*j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(lambda j: _count_chunk(*j), jobs))
    return np.sum(np.array(results, dtype=np.int64), axis=0)


def monte_carlo_rate(
    rule: DecisionRule, mu: float, n_sims: int, rng: RngStream, n_jobs: int = 1
) -> Tuple[float, float]:
    """Approval frequency with i.i.d. ``Normal(mu, 1)`` z-scores and its MC standard error."""
    count = _mc_counts([rule], mu, n_sims, rng, n_jobs)[0]
    rate = count / n_sims
    return float(rate), math.sqrt(rate * (1 - rate) / n_sims)


def type_one_error(rule: DecisionRule, n_sims: int, rng: RngStream, n_jobs: int = 1) -> Tuple[float, float]:
    return monte_carlo_rate(rule, 0.0, n_sims, rng, n_jobs)


@dataclass(frozen=True)
class PowerSpec:
    per_trial_alpha: float = TWO_TRIALS_ALPHA
    per_trial_power: float = 0.8
    n_sims: int = 10**6
    rng: RngStream = field(default_factory=lambda: RngStream(20200101))

    def __post_init__(self):
        if self.n_sims < 1:
            raise ValueError("n_sims must be positive")
        check_pvalues([self.per_trial_alpha, self.per_trial_power])

    @property
    def mu_alt(self) -> float:
        """Mean z-score under the design alternative."""
        return normal_isf(self.per_trial_alpha) + normal_isf(1 - self.per_trial_power)


def project_power(rule: DecisionRule, spec: PowerSpec, n_jobs: int = 1) -> float:
    """Monte Carlo probability of approval under the design alternative."""
    return monte_carlo_rate(rule, spec.mu_alt, spec.n_sims, spec.rng, n_jobs)[0]


def project_power_table(
    powers: Sequence[float] = TABLE2_POWERS,
    rules: Optional[Sequence[DecisionRule]] = None,
    n_sims: int = 10**6,
    rng: RngStream = RngStream(20200101),
    per_trial_alpha: float = TWO_TRIALS_ALPHA,
    n_jobs: int = 1,
) -> Dict[float, Dict[str, float]]:
    """Project power for each trial power and rule.

    Rules are evaluated on common random numbers within each row, so the
    differences between columns carry less Monte Carlo noise than the cells.
    """
    rules = list(rules) if rules is not None else standard_rules(per_trial_alpha**2)
    table = {}
    for i, pw in enumerate(powers):
        spec = PowerSpec(per_trial_alpha, pw, n_sims, rng.substream(i))
        counts = _mc_counts(rules, spec.mu_alt, n_sims, spec.rng, n_jobs)
        table[pw] = {r.kind: float(c / n_sims) for r, c in zip(rules, counts)}
    return table


# -- rejection regions -------------------------------------------------------


@dataclass(frozen=True)
class BoundaryPoint:
    method: str
    p1: float
    p2: Optional[float]
    z1: float
    z2: Optional[float]


def _largest_p2(rule: DecisionRule, p1: float) -> Optional[float]:
    z1 = z_from_p(p1)
    k = rule.kind
    if k == "two_trials":
        alpha = rule.params["per_trial_alpha"]
        return alpha if p1 <= alpha else None
    if k in ("harmonic_controlled", "harmonic_liberal"):
        c = rule.params["critical_value"]
        if z1 <= 0:
            return None
        slack = 4.0 / c - 1.0 / z1**2
        if slack <= 0:
            return None
        return normal_sf(slack**-0.5)
    if k == "fisher":
        return min(1.0, rule.params["product_threshold"] / p1)
    w1, w2 = rule.params.get("weights", (1.0, 1.0))
    thr = (rule.params["z_threshold"] * math.sqrt(w1 + w2) - math.sqrt(w1) * z1) / math.sqrt(w2)
    return normal_sf(thr)


def rejection_boundary(rule: DecisionRule, grid) -> List[BoundaryPoint]:
    """For each ``p1`` the largest ``p2`` the rule approves (``None`` if none)."""
    _require_two(rule)
    out = []
    for p1 in check_pvalues(grid, "grid"):
        p1 = float(p1)
        p2 = _largest_p2(rule, p1)
        if p2 is None:
            z2 = None
        elif p2 >= 1.0:
            z2 = -math.inf
        else:
            z2 = z_from_p(p2)
        out.append(BoundaryPoint(rule.kind, p1, p2, z_from_p(p1), z2))
    return out


def equal_p_boundary(rule: DecisionRule) -> float:
    """Largest common p-value at which every study passing the rule approves."""
    n = rule.n_studies
    k = rule.kind
    if k == "two_trials":
        return rule.params["per_trial_alpha"]
    if k in ("harmonic_controlled", "harmonic_liberal"):
        return normal_sf(math.sqrt(rule.params["critical_value"] / n))
    if k == "fisher":
        return rule.params["product_threshold"] ** (1.0 / n)
    w = np.asarray(rule.params.get("weights", np.ones(n)), dtype=float)
    return normal_sf(rule.params["z_threshold"] * math.sqrt(np.sum(w)) / np.sum(np.sqrt(w)))
