"""Clustered uncertainty and the derived analyses built on the OLS core.

The covariance estimator is the one-way cluster-robust (Liang-Zeger)
sandwich with the CR1 small-sample factor::

    V = c * (X'X)^{-1} ( sum_g X_g' e_g e_g' X_g ) (X'X)^{-1}
    c = G/(G-1) * (N-1)/(N-K)

With every cluster a singleton this reduces exactly to HC1. Nothing here
materializes the dense design: the bread comes from count cross-tabs and
the per-cluster scores from grouped sums.
"""

from __future__ import annotations

import logging
import math

import numpy as np
import pandas as pd

from ..errors import DesignError, FitError
from .design import Design, ModelSpec, build_design, build_design_frame
from .ols import FittedModel, categorical_gram, fit_ols_fe, qr_lstsq

log = logging.getLogger(__name__)


def _full_gram(design: Design) -> tuple[np.ndarray, list[str]]:
    """X'X for [intercept | dummies | covariates] without densifying."""
    A_cat, names = categorical_gram(design)
    C = design.covariates
    c = C.shape[1]
    if c == 0:
        return A_cat, names
    k0 = A_cat.shape[0]
    K = k0 + c
    A = np.zeros((K, K))
    A[:k0, :k0] = A_cat
    A[0, k0:] = C.sum(axis=0)
    A[k0:, 0] = A[0, k0:]
    pos = 1
    for f in design.factors:
        keep = np.arange(f.n_levels) != f.reference
        for j in range(c):
            sums = np.bincount(f.codes, weights=C[:, j], minlength=f.n_levels)
            A[pos : pos + f.n_levels - 1, k0 + j] = sums[keep]
            A[k0 + j, pos : pos + f.n_levels - 1] = sums[keep]
        pos += f.n_levels - 1
    A[k0:, k0:] = C.T @ C
    return A, names + design.covariate_names


def _cluster_scores(design: Design, residuals: np.ndarray) -> np.ndarray:
    """S[g, k] = sum over rows of cluster g of x_k * e (grouped sums)."""
    G = design.n_clusters
    cl = design.cluster_codes
    k_cat = 1 + sum(f.n_levels - 1 for f in design.factors)
    c = design.covariates.shape[1]
    S = np.zeros((G, k_cat + c))
    S[:, 0] = np.bincount(cl, weights=residuals, minlength=G)
    pos = 1
    for f in design.factors:
        sums = np.bincount(
            cl * f.n_levels + f.codes, weights=residuals, minlength=G * f.n_levels
        ).reshape(G, f.n_levels)
        keep = np.arange(f.n_levels) != f.reference
        S[:, pos : pos + f.n_levels - 1] = sums[:, keep]
        pos += f.n_levels - 1
    for j in range(c):
        S[:, pos + j] = np.bincount(cl, weights=design.covariates[:, j] * residuals, minlength=G)
    return S


def _cluster_constant_factors(design: Design) -> list[str]:
    """Factors whose level never varies inside any cluster."""
    flagged = []
    for f in design.factors:
        first = np.zeros(design.n_clusters, dtype=f.codes.dtype)
        first[design.cluster_codes] = f.codes
        if np.array_equal(first[design.cluster_codes], f.codes):
            flagged.append(f.name)
    return flagged


def cluster_se(design: Design, residuals: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """CR1 clustered standard errors for every estimated term.

    Returns the SE vector in design column order plus notes (terms
    constant within every cluster are flagged, not rejected).
    """
    G = design.n_clusters
    if G < 2:
        raise FitError("clustered SEs need at least 2 clusters")
    N = design.n_obs
    A, names = _full_gram(design)
    K = len(names)
    S = _cluster_scores(design, residuals)
    meat = S.T @ S
    bread = qr_lstsq(A, np.eye(K), column_names=names)
    factor = (G / (G - 1.0)) * ((N - 1.0) / (N - K))
    vcov = factor * (bread @ meat @ bread)
    se = np.sqrt(np.maximum(np.diag(vcov), 0.0))
    notes = [
        f"factor {name!r} is constant within every cluster (level is a union of clusters)"
        for name in _cluster_constant_factors(design)
    ]
    return se, notes


NESTED_LADDER: list[tuple[str, tuple[str, ...]]] = [
    ("length", ()),
    ("length+meter+form", ("meter", "form")),
    ("length+meter+form+poet", ("meter", "form", "poet")),
]


def nested_r2(
    df: pd.DataFrame,
    outcome: str = "hardness",
    covariates: tuple[str, ...] = ("n_symbols", "n_tokens"),
    method: str = "auto",
) -> list[dict]:
    """Incremental explained-variance ledger over the control layers.

    Layer order: length controls, then meter+form, then poet. The delta
    of the first layer is 0 by convention, so the deltas sum to final
    minus first R-squared.
    """
    entries: list[dict] = []
    prev: float | None = None
    for label, fes in NESTED_LADDER:
        spec = ModelSpec(outcome=outcome, fixed_effects=fes, covariates=covariates)
        fit = fit_ols_fe(build_design(df, spec), method=method, cluster=False)
        r2 = fit.result.r_squared
        entries.append(
            {
                "model": label,
                "r_squared": r2,
                "delta_r_squared": 0.0 if prev is None else r2 - prev,
            }
        )
        prev = r2
    return entries


def within_meter_effects(
    df: pd.DataFrame,
    meter: str,
    outcome: str,
    min_cell: int = 2000,
    covariates: tuple[str, ...] = ("n_symbols", "n_tokens"),
    method: str = "auto",
) -> dict[str, float]:
    """Standardized poet effects inside one meter.

    Fits outcome ~ poet + form + length on the meter subset restricted to
    poets with at least ``min_cell`` mesras there, then divides each poet
    coefficient by the pooled within-meter standard deviation of the
    outcome (sample SD over the rows entering the fit). The reference
    poet is 0 by construction; unsupported poets are simply absent.
    """
    sub = df[df["meter"] == meter]
    if sub.empty:
        raise DesignError(f"no rows for meter {meter!r}")
    counts = sub.groupby("poet_id").size()
    supported = counts[counts >= min_cell].index
    if len(supported) < 2:
        raise FitError(f"meter {meter!r} has {len(supported)} supported poets; need at least 2")
    sub = sub[sub["poet_id"].isin(supported)]

    fixed_effects: tuple[str, ...] = ("poet", "form")
    if sub["form"].nunique() < 2:
        # single-level form is collinear with the intercept; dropping it
        # changes nothing in the fit
        fixed_effects = ("poet",)
    spec = ModelSpec(
        outcome=outcome,
        fixed_effects=fixed_effects,
        covariates=covariates,
        subset_meter=meter,
    )
    fit = fit_ols_fe(build_design(sub, spec), method=method, cluster=False)
    values = sub[outcome].dropna().to_numpy(dtype=np.float64)
    sd = float(values.std(ddof=1))
    if sd == 0.0:
        raise FitError(f"outcome {outcome!r} has zero variance inside meter {meter!r}")
    effects: dict[str, float] = {}
    for term, coef in fit.result.coefficients.items():
        if term.startswith("poet["):
            effects[term[5:-1]] = coef / sd
    return effects


def effect_correlation(effects_by_meter: dict[str, dict[str, float]]) -> dict:
    """Mean pairwise Pearson correlation of poet effects across meters.

    Pairs sharing fewer than 3 poets are skipped and logged; degenerate
    (zero-variance) pairs are skipped likewise.
    """
    meters = sorted(effects_by_meter)
    if len(meters) < 2:
        raise FitError("effect correlation needs at least 2 meters")
    pairs: list[dict] = []
    skipped: list[dict] = []
    for i in range(len(meters)):
        for j in range(i + 1, len(meters)):
            a, b = effects_by_meter[meters[i]], effects_by_meter[meters[j]]
            shared = sorted(set(a) & set(b))
            if len(shared) < 3:
                skipped.append({"meters": [meters[i], meters[j]], "n_shared": len(shared)})
                log.info("skipping meter pair %s/%s: %d shared poets", meters[i], meters[j], len(shared))
                continue
            x = np.array([a[p] for p in shared])
            y = np.array([b[p] for p in shared])
            if x.std() == 0.0 or y.std() == 0.0:
                skipped.append({"meters": [meters[i], meters[j]], "n_shared": len(shared), "reason": "zero variance"})
                continue
            r = float(np.corrcoef(x, y)[0, 1])
            pairs.append({"meters": [meters[i], meters[j]], "n_shared": len(shared), "r": r})
    if not pairs:
        raise FitError("no meter pair shares at least 3 poets")
    mean_r = math.fsum(p["r"] for p in pairs) / len(pairs)
    return {"mean_r": mean_r, "pairs": pairs, "skipped": skipped}


def century_trend(
    df: pd.DataFrame,
    outcome: str,
    covariates: tuple[str, ...] = ("n_symbols", "n_tokens"),
    method: str = "auto",
) -> FittedModel:
    """Reduced-control regression of one metric on century dummies.

    Rows without century metadata are excluded; centuries become
    zero-padded labels so the reference is the earliest attested century.
    Descriptive by design: no poet/meter/form controls.
    """
    if "century" not in df.columns:
        raise DesignError("metric rows carry no century column")
    work = df[df["century"].notna()].copy()
    if work.empty:
        raise DesignError("no rows with century metadata")
    work["century_label"] = work["century"].astype(int).map(lambda c: f"c{c:02d}")
    design = build_design_frame(
        work,
        outcome=outcome,
        factor_columns=[("century", "century_label")],
        covariates=covariates,
    )
    return fit_ols_fe(design, method=method)
