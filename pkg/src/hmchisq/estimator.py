"""scikit-learn style front end.

``HarmonicChiSquaredTest`` treats a set of studies as the data it is fitted
to: ``fit`` computes the statistic, the overall p-value and the decision, and
the fitted object answers p-value-function and interval queries. Parameters
follow the scikit-learn conventions so ``get_params``/``set_params``/``clone``
work as usual.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive, check_pvalues, check_same_length, check_vector
from .bounds import necessary_bound, sufficient_bound
from .core import Inequality, SignificanceSpec, Study, StudySet, critical_value, harmonic_p_value, z_from_p
from .inference import confidence_interval, two_sided_p

__all__ = ["HarmonicChiSquaredTest", "PValueToZ"]


class PValueToZ(TransformerMixin, BaseEstimator):
    """Stateless transformer from one-sided p-values to z-scores."""

    def fit(self, X, y=None):
        check_pvalues(np.ravel(X))
        self.n_features_in_ = 1 if np.ndim(X) < 2 else np.shape(X)[1]
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        return np.reshape(z_from_p(check_pvalues(np.ravel(X))), X.shape)

    def inverse_transform(self, Z):
        from .core import p_from_z

        return p_from_z(np.asarray(Z, dtype=float))


class HarmonicChiSquaredTest(BaseEstimator):
    """Harmonic mean chi-squared test for ``n`` independent studies.

    Parameters
    ----------
    alpha : float, default=0.000625
        Overall one-sided significance level (``0.025**2`` matches the
        two-trials rule).
    weighting : {"none", "inverse_variance", "explicit"}, default="none"
        ``"inverse_variance"`` uses ``1/se**2`` and needs standard errors;
        ``"explicit"`` uses ``sample_weight`` passed to :meth:`fit`.

    Attributes
    ----------
    studies_ : StudySet
    statistic_ : float
    p_value_ : float or Inequality
    critical_value_ : float
    necessary_bound_, sufficient_bound_ : float
    approved_ : bool
    """

    def __init__(self, alpha=0.025**2, weighting="none"):
        self.alpha = alpha
        self.weighting = weighting

    def fit(self, X, y=None, sample_weight=None):
        """Fit to study results.

        ``X`` is either a 1-D array of one-sided p-values, or an
        ``(n_studies, 2)`` array whose columns are effect estimate and standard
        error (positive effects favour the hypothesis). ``y`` is ignored.
        """
        if self.weighting not in ("none", "inverse_variance", "explicit"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1 or (X.ndim == 2 and X.shape[1] == 1):
            p = check_pvalues(np.ravel(X))
            studies = [Study(str(i), p_one_sided=float(v)) for i, v in enumerate(p)]
            ses = None
        elif X.ndim == 2 and X.shape[1] == 2:
            effects = check_vector(X[:, 0], "effects")
            ses = check_positive(X[:, 1], "standard errors")
            studies = [Study(str(i), z=e / s, effect=e, se=s) for i, (e, s) in enumerate(zip(effects, ses))]
        else:
            raise ValueError("X must be 1-D p-values or an (n_studies, 2) array of effect and standard error")

        weights = None
        if self.weighting == "inverse_variance":
            if ses is None:
                raise ValueError("inverse-variance weighting needs effect/standard-error input")
            weights = 1.0 / ses**2
        elif self.weighting == "explicit":
            if sample_weight is None:
                raise ValueError("weighting='explicit' needs sample_weight")
            weights = check_positive(sample_weight, "sample_weight")
            check_same_length(weights, studies, names=("sample_weight", "studies"))

        self.studies_ = StudySet(tuple(studies))
        if weights is not None:
            self.studies_ = self.studies_.with_weights(weights)
        n = self.studies_.n
        spec = SignificanceSpec(self.alpha, n)
        result = harmonic_p_value(self.studies_)
        self.result_ = result
        self.statistic_ = result.statistic
        self.p_value_ = result.p_overall
        self.critical_value_ = critical_value(spec)
        self.necessary_bound_ = necessary_bound(spec)
        self.sufficient_bound_ = sufficient_bound(spec)
        self.approved_ = result.decide(self.alpha)
        self.n_studies_ = n
        return self

    @property
    def p_value_is_inequality_(self):
        check_is_fitted(self)
        return isinstance(self.p_value_, Inequality)

    def two_sided_p(self, mu):
        """Two-sided p-value for ``theta = mu``; needs effect/SE input."""
        check_is_fitted(self)
        return two_sided_p(self.studies_, mu)

    def confidence_interval(self, gamma=0.95, scale="analysis"):
        check_is_fitted(self)
        return confidence_interval(self.studies_, gamma, scale=scale)
