"""Run every combination method on a study table."""
from __future__ import annotations

from typing import Dict, Optional

from .bounds import necessary_bound, sufficient_bound
from .comparators import fisher_combined, fixed_effects_meta, stouffer_pooled
from .core import CombinationResult, SignificanceSpec, harmonic_p_value
from .data_io import AnalysisReport, StudyTable
from .inference import confidence_interval

__all__ = ["DEFAULT_ALPHA", "run_methods", "sensitivity", "bounds_check", "interval", "build_report"]

DEFAULT_ALPHA = 0.025**2
WEIGHT_MODES = ("none", "inverse_variance", "explicit")


def _weight_mode_for_weighted(table: StudyTable, weights: str) -> Optional[str]:
    if weights == "explicit":
        return "explicit"
    if all(se is not None for se in table.ses):
        return "inverse_variance"
    return None


def two_trials_result(ps) -> CombinationResult:
    """All-studies-significant rule expressed as a p-value, ``max(p)^n``.

    ``max(p)^n <= alpha^n`` exactly when every study has ``p <= alpha``.
    """
    n = len(ps)
    return CombinationResult("two_trials", max(ps) ** n, n, extra={"max_p": max(ps)})


def run_methods(table: StudyTable, weights: str = "none") -> Dict[str, CombinationResult]:
    """All methods on ``table``; weighted variants are included whenever weights can be formed."""
    if weights not in WEIGHT_MODES:
        raise ValueError(f"weights must be one of {WEIGHT_MODES}")
    ps = table.pvalues
    unweighted = table.to_study_set("none")
    out = {
        "harmonic": harmonic_p_value(unweighted, weighted=False),
        "fisher": fisher_combined(ps),
        "stouffer": stouffer_pooled(ps),
        "two_trials": two_trials_result(ps),
    }
    mode = _weight_mode_for_weighted(table, weights)
    if mode is not None:
        ws = table.to_study_set(mode)
        out["harmonic_weighted"] = harmonic_p_value(ws, weighted=True)
        out["stouffer_weighted"] = stouffer_pooled(ps, ws.weights)
    if all(se is not None for se in table.ses):
        rec = table.to_study_set(effects="reconstructed")
        out["fixed_effects_meta"] = fixed_effects_meta(rec.effects, rec.ses).as_result()
    return out


def sensitivity(table: StudyTable, study_id: str, factor: float, weights: str = "none"):
    """Before/after p-values and their ratio when one study's p-value is scaled."""
    before = run_methods(table, weights)
    after = run_methods(table.perturb(study_id, factor), weights)
    rows = {}
    for m, res in before.items():
        a, b = res.p_overall, after[m].p_overall
        numeric = not (res.is_inequality or after[m].is_inequality)
        rows[m] = {"before": a, "after": b, "factor": (b / a) if numeric else None}
    return rows


def bounds_check(table: StudyTable, alpha_H: float = DEFAULT_ALPHA) -> dict:
    spec = SignificanceSpec(alpha_H, len(table))
    nec, suf = necessary_bound(spec), sufficient_bound(spec)
    per_study = {
        r.id: {"p": p, "below_necessary": p <= nec, "below_sufficient": p <= suf}
        for r, p in zip(table.rows, table.pvalues)
    }
    return {"alpha_H": alpha_H, "n": len(table), "c_H": spec.c_H, "necessary": nec, "sufficient": suf, "studies": per_study}


def interval(table: StudyTable, gamma: float, weights: str = "none", scale: str = "log"):
    """Confidence interval from inverting the (weighted) harmonic test on the reported effects."""
    studies = table.to_study_set(weights)
    ci = confidence_interval(studies, gamma)
    return ci.exponentiated() if scale == "hr" else ci


def build_report(
    table: StudyTable,
    alpha_H: float = DEFAULT_ALPHA,
    weights: str = "none",
    gammas=(0.95, 1 - 2 * DEFAULT_ALPHA),
    perturb=None,
) -> AnalysisReport:
    """Full analysis bundle with results, bounds and intervals."""
    from . import __version__

    methods = run_methods(table, weights)
    results = {
        m: {
            "p": r.p_overall,
            "statistic": r.statistic,
            "approved": r.decide(alpha_H),
            **r.extra,
        }
        for m, r in methods.items()
    }
    ci = {}
    for g in gammas:
        c = interval(table, g, weights)
        e = c.exponentiated()
        ci[f"{g:g}"] = {"log": [c.lower, c.upper], "hr": [e.lower, e.upper], "warnings": list(c.warnings)}
    settings = {"alpha_H": alpha_H, "weights": weights, "gammas": list(gammas), "effects_for_meta": "reconstructed", "effects_for_ci": "reported"}
    if perturb is not None:
        sid, factor = perturb
        settings["perturb"] = {"study": sid, "factor": factor}
        results["sensitivity"] = sensitivity(table, sid, factor, weights)
    dataset = {"source": table.source, "sha256": table.sha256(), "n": len(table), "ids": table.ids, "benefit_direction": table.benefit_direction}
    return AnalysisReport(dataset, settings, results, bounds_check(table, alpha_H), ci, __version__)
