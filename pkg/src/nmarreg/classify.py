"""Plug-in classification from regression estimates.

A regression curve ``m_hat`` induces the rule "predict 1 iff m_hat(x) > 1/2"
(ties go to 0); thresholding the true curve gives the reference rule whose
misclassification probability is the Bayes risk.  Reports compare a
classifier's empirical error on a fresh labeled sample against the Bayes
risk computed analytically or by deterministic quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .data import SyntheticModel
from .plugin import RegressionEstimate

# Quadrature resolution for Bayes-risk and margin-mass integrals (d <= 2).
QUADRATURE_POINTS_1D = 1_000_000
QUADRATURE_POINTS_2D = 1_000


@dataclass(frozen=True)
class Classifier:
    """Binary rule with provenance ('bayes_oracle' or the estimator kind)."""

    predictor: Callable[[np.ndarray], np.ndarray]
    source: str

    def predict(self, x):
        return self.predictor(x)


@dataclass(frozen=True)
class RiskReport:
    """Empirical misclassification rate, reference Bayes risk, and excess."""

    empirical_risk: float
    bayes_risk: float
    excess: float
    n_eval: int


@dataclass(frozen=True)
class MarginReport:
    """Mass near the decision boundary at each threshold, and the fitted
    log-log slope (None when some mass estimate is zero)."""

    t_values: np.ndarray
    probabilities: np.ndarray
    exponent: Optional[float]


def plugin_classify(m_value):
    """Threshold rule: 1 iff the regression value exceeds 1/2, else 0."""
    values = np.asarray(m_value, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("regression values must be finite")
    labels = (values > 0.5).astype(int)
    return int(labels) if labels.ndim == 0 else labels


def bayes_oracle(model: SyntheticModel, x):
    """Threshold of the true regression function (classification models only)."""
    if model.task != "classification":
        raise ValueError("bayes_oracle needs a classification model")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1 and x.shape[0] == model.d
    pts = x.reshape(1, -1) if single else x.reshape(-1, model.d)
    labels = plugin_classify(model.m(pts))
    return int(labels[0]) if single else labels


def bayes_classifier(model: SyntheticModel) -> Classifier:
    return Classifier(predictor=lambda x: bayes_oracle(model, x), source="bayes_oracle")


def classifier_from_estimate(estimate: RegressionEstimate) -> Classifier:
    """Plug-in rule from any fitted regression curve."""
    source = str(estimate.meta.get("estimator", "regression_estimate"))
    return Classifier(
        predictor=lambda x: plugin_classify(estimate.predictor(x)),
        source=source,
    )


def bayes_risk_value(model: SyntheticModel) -> float:
    """Reference risk ``E[min(m(X), 1-m(X))]``: the model's analytic value
    when present, otherwise deterministic midpoint quadrature (d <= 2)."""
    if model.task != "classification":
        raise ValueError("Bayes risk needs a classification model")
    if model.bayes_risk is not None:
        return float(model.bayes_risk)
    if model.d > 2:
        raise ValueError("quadrature fallback covers d <= 2 only")
    per_axis = QUADRATURE_POINTS_1D if model.d == 1 else QUADRATURE_POINTS_2D
    grid = model.covariate_law.grid(per_axis)
    m = model.m(grid)
    return float(np.mean(np.minimum(m, 1.0 - m)))


def risk_report(classifier: Classifier, model: SyntheticModel, n_eval: int, seed) -> RiskReport:
    """Misclassification rate on a fresh labeled sample versus the Bayes risk."""
    if model.task != "classification":
        raise ValueError("risk_report needs a classification model")
    if n_eval < 1000:
        raise ValueError("n_eval must be at least 1000")
    rng = np.random.default_rng(seed)
    x = model.sample_x(rng, n_eval)
    labels = (rng.random(n_eval) < model.m(x)).astype(int)
    predicted = np.asarray(classifier.predict(x))
    empirical = float(np.mean(predicted != labels))
    bayes = bayes_risk_value(model)
    return RiskReport(
        empirical_risk=empirical,
        bayes_risk=bayes,
        excess=empirical - bayes,
        n_eval=n_eval,
    )


def margin_diagnostic(model: SyntheticModel, t_values: Sequence[float]) -> MarginReport:
    """Estimate ``P{0 < |m(X) - 1/2| <= t}`` for each ``t`` by deterministic
    quadrature (d <= 2), plus the least-squares slope of log P on log t."""
    if model.task != "classification":
        raise ValueError("margin_diagnostic needs a classification model")
    t_values = np.asarray(list(t_values), dtype=float)
    if t_values.ndim != 1 or len(t_values) == 0:
        raise ValueError("t_values must be a nonempty sequence")
    if np.any(t_values <= 0) or np.any(t_values > 0.5):
        raise ValueError("thresholds must lie in (0, 1/2]")
    if model.d > 2:
        raise ValueError("quadrature covers d <= 2 only")
    per_axis = QUADRATURE_POINTS_1D if model.d == 1 else QUADRATURE_POINTS_2D
    grid = model.covariate_law.grid(per_axis)
    gap = np.abs(model.m(grid) - 0.5)
    probs = np.array([np.mean((gap > 0) & (gap <= t)) for t in t_values])
    exponent = None
    if np.all(probs > 0) and len(t_values) >= 2:
        slope = np.polyfit(np.log(t_values), np.log(probs), 1)[0]
        exponent = float(slope)
    return MarginReport(t_values=t_values, probabilities=probs, exponent=exponent)


def write_risk_report(path, report: RiskReport) -> None:
    """One-row CSV with columns ``risk,bayes_risk,excess``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("risk,bayes_risk,excess\n")
        fh.write("%.17g,%.17g,%.17g\n" % (report.empirical_risk, report.bayes_risk, report.excess))
