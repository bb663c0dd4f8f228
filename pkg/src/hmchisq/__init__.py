"""Harmonic mean chi-squared test for combining one-sided evidence."""

__version__ = "0.1.0"

from .bounds import BoundsRow, bounds_table, necessary_bound, sufficient_bound
from .comparators import (
    DecisionRule,
    PowerSpec,
    conditional_power,
    fisher_combined,
    fisher_rule,
    fixed_effects_meta,
    harmonic_rule,
    liberal_harmonic_rule,
    project_power,
    rejection_boundary,
    stouffer_pooled,
    stouffer_rule,
    two_trials_decide,
    two_trials_rule,
)
from .core import (
    CombinationResult,
    Inequality,
    SignificanceSpec,
    Study,
    StudySet,
    critical_value,
    harmonic_p_value,
    harmonic_stat,
    harmonic_stat_effect_form,
    harmonic_stat_weighted,
    z_from_p,
)
from .data_io import StudyTable, carvedilol_dataset, load_csv
from .estimator import HarmonicChiSquaredTest, PValueToZ
from .inference import ConfidenceInterval, confidence_interval, p_value_curve, two_sided_p
from .numerics import RngStream

__all__ = [
    "BoundsRow",
    "CombinationResult",
    "ConfidenceInterval",
    "DecisionRule",
    "HarmonicChiSquaredTest",
    "Inequality",
    "PValueToZ",
    "PowerSpec",
    "RngStream",
    "SignificanceSpec",
    "Study",
    "StudySet",
    "StudyTable",
    "bounds_table",
    "carvedilol_dataset",
    "conditional_power",
    "confidence_interval",
    "critical_value",
    "fisher_combined",
    "fisher_rule",
    "fixed_effects_meta",
    "harmonic_p_value",
    "harmonic_rule",
    "harmonic_stat",
    "harmonic_stat_effect_form",
    "harmonic_stat_weighted",
    "liberal_harmonic_rule",
    "load_csv",
    "necessary_bound",
    "p_value_curve",
    "project_power",
    "rejection_boundary",
    "stouffer_pooled",
    "stouffer_rule",
    "sufficient_bound",
    "two_sided_p",
    "two_trials_decide",
    "two_trials_rule",
    "z_from_p",
]
