"""Controlled regressions, variance ledgers and bootstrap trends.

Public surface:

- :func:`build_design` / :class:`ModelSpec` — joined metric rows to a
  factor-encoded design description.
- :func:`fit_ols_fe` / :class:`FitResult` — least squares by dense QR or
  by high-cardinality factor absorption, with poem-clustered errors.
- :func:`cluster_se` — CR1 sandwich standard errors.
- :func:`nested_r2`, :func:`within_meter_effects`,
  :func:`effect_correlation`, :func:`century_trend` — the derived
  analyses.
- :func:`bootstrap_century` / :class:`BootstrapTrend` — poem bootstrap of
  century means.
"""

from .design import Design, Factor, ModelSpec, build_design
from .ols import FitResult, FittedModel, fit_ols_fe, qr_lstsq
from .inference import (
    century_trend,
    cluster_se,
    effect_correlation,
    nested_r2,
    within_meter_effects,
)
from .bootstrap import BootstrapTrend, bootstrap_century

__all__ = [
    "Design",
    "Factor",
    "ModelSpec",
    "build_design",
    "FitResult",
    "FittedModel",
    "fit_ols_fe",
    "qr_lstsq",
    "cluster_se",
    "nested_r2",
    "within_meter_effects",
    "effect_correlation",
    "century_trend",
    "BootstrapTrend",
    "bootstrap_century",
]
