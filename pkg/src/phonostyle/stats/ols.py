"""Least-squares estimation for high-cardinality categorical designs.

Two rails produce the same coefficients:

- dense: materialize the dummy-expanded matrix and solve by Householder
  QR. Used for small problems and as the internal cross-check target.
- absorb: sweep the outcome and covariates with alternating within-group
  demeaning until every within-group mean of every partially-demeaned
  column falls below ``demean_tol`` (Frisch-Waugh partialling over all
  factor groups), solve the small residualized covariate system by QR,
  then recover the absorbed categorical effects exactly from the group
  structure of the covariate-adjusted residuals (normal equations
  assembled from level counts and cross-tabulations, which reduce to
  plain group means in the single-factor case).

Coefficient vectors are keyed by term name; reference levels are
reported with a literal 0.0 coefficient.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError, FitError, RankDeficiencyError
from .design import Design, ModelSpec

DEMEAN_TOL = 1e-10
MAX_SWEEPS = 500
# auto method: go dense while the dummy-expanded matrix stays small
DENSE_CELL_LIMIT = 4_000_000


def qr_lstsq(A: np.ndarray, b: np.ndarray, column_names: list[str] | None = None, rtol: float = 1e-10) -> np.ndarray:
    """Least squares via Householder QR, from scratch.

    ``b`` may be a vector or a matrix of stacked right-hand sides. A
    near-zero diagonal of R names the offending (dependent) column and
    raises RankDeficiencyError.
    """
    R = np.array(A, dtype=np.float64, copy=True)
    if R.ndim != 2:
        raise FitError("qr_lstsq expects a 2-D system")
    n, k = R.shape
    if n < k:
        raise FitError(f"underdetermined system: {n} rows, {k} columns")
    squeeze = b.ndim == 1
    Y = np.array(b, dtype=np.float64, copy=True)
    if squeeze:
        Y = Y[:, None]
    col_scale = np.sqrt((R * R).sum(axis=0))
    col_scale[col_scale == 0.0] = 1.0

    for j in range(k):
        x = R[j:, j]
        norm_x = np.sqrt(x @ x)
        if norm_x <= rtol * col_scale[j]:
            name = column_names[j] if column_names else f"column {j}"
            raise RankDeficiencyError([name])
        v = x.copy()
        v[0] += np.copysign(norm_x, x[0])
        v /= np.sqrt(v @ v)
        # apply reflector to the trailing block and the carried RHS
        R[j:, j:] -= 2.0 * np.outer(v, v @ R[j:, j:])
        Y[j:, :] -= 2.0 * np.outer(v, v @ Y[j:, :])

    X = np.empty((k, Y.shape[1]))
    for i in range(k - 1, -1, -1):
        X[i] = (Y[i] - R[i, i + 1 :] @ X[i + 1 :]) / R[i, i]
    return X[:, 0] if squeeze else X


@dataclass
class FitResult:
    """Coefficients, clustered uncertainty and fit diagnostics."""

    coefficients: dict[str, float]
    se_clustered: dict[str, float]
    r_squared: float
    n_obs: int
    n_clusters: int
    reference_levels: dict[str, str]
    spec: ModelSpec | None = None
    method: str = ""
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients,
            "se_clustered": self.se_clustered,
            "r_squared": self.r_squared,
            "n_obs": self.n_obs,
            "n_clusters": self.n_clusters,
            "reference_levels": self.reference_levels,
            "spec": self.spec.to_dict() if self.spec is not None else None,
            "method": self.method,
            "notes": self.notes,
        }


@dataclass
class FittedModel:
    """FitResult plus the row-level arrays downstream steps need."""

    result: FitResult
    residuals: np.ndarray
    fitted: np.ndarray
    theta: np.ndarray  # stacked parameter vector in design column order


def _group_means(values: np.ndarray, codes: np.ndarray, n_levels: int, counts: np.ndarray) -> np.ndarray:
    return np.bincount(codes, weights=values, minlength=n_levels) / counts


def _demean(design: Design, columns: np.ndarray, tol: float, max_sweeps: int) -> np.ndarray:
    """Alternating within-group demeaning of stacked columns.

    Iterates until the largest within-group mean observed during a full
    sweep drops below ``tol``; a single factor converges in one sweep.
    """
    M = columns.copy()
    groups = [(f.codes, f.n_levels, np.bincount(f.codes, minlength=f.n_levels)) for f in design.factors]
    for _ in range(max_sweeps):
        worst = 0.0
        for codes, n_levels, counts in groups:
            for j in range(M.shape[1]):
                means = _group_means(M[:, j], codes, n_levels, counts)
                worst = max(worst, float(np.abs(means).max()))
                M[:, j] -= means[codes]
        if worst < tol:
            return M
    raise ConvergenceError(
        f"alternating demeaning did not reach {tol} within {max_sweeps} sweeps (last max group mean {worst:.3e})"
    )


def categorical_gram(design: Design) -> tuple[np.ndarray, list[str]]:
    """Gram matrix of [intercept | factor dummies] from count cross-tabs.

    Exact and O(n): diagonal blocks are level counts, off-diagonal blocks
    are factor-pair contingency tables with reference rows/columns
    removed.
    """
    factors = design.factors
    sizes = [f.n_levels - 1 for f in factors]
    k0 = 1 + sum(sizes)
    names = ["intercept"]
    for f in factors:
        names.extend(f.column_names())
    offsets = np.cumsum([1] + sizes)[:-1]

    A = np.zeros((k0, k0))
    A[0, 0] = design.n_obs
    keep = [np.arange(f.n_levels) != f.reference for f in factors]
    for i, f in enumerate(factors):
        counts = np.bincount(f.codes, minlength=f.n_levels)
        cols = slice(offsets[i], offsets[i] + sizes[i])
        A[0, cols] = counts[keep[i]]
        A[cols, 0] = counts[keep[i]]
        A[cols, cols] = np.diag(counts[keep[i]].astype(np.float64))
        for jj in range(i + 1, len(factors)):
            g = factors[jj]
            ct = np.bincount(
                f.codes.astype(np.int64) * g.n_levels + g.codes,
                minlength=f.n_levels * g.n_levels,
            ).reshape(f.n_levels, g.n_levels)
            block = ct[keep[i]][:, keep[jj]].astype(np.float64)
            cols_j = slice(offsets[jj], offsets[jj] + sizes[jj])
            A[cols, cols_j] = block
            A[cols_j, cols] = block.T
    return A, names


def _categorical_normal_solve(design: Design, r: np.ndarray) -> np.ndarray:
    """Exact LS of r on [intercept | factor dummies] via count cross-tabs.

    Returns the stacked categorical parameters in column order. With one
    factor this reproduces reference-adjusted group means of r.
    """
    A, names = categorical_gram(design)
    k0 = len(names)
    b = np.zeros(k0)
    b[0] = r.sum()
    pos = 1
    for f in design.factors:
        sums = np.bincount(f.codes, weights=r, minlength=f.n_levels)
        keep = np.arange(f.n_levels) != f.reference
        b[pos : pos + f.n_levels - 1] = sums[keep]
        pos += f.n_levels - 1
    return qr_lstsq(A, b, column_names=names)


def _predict_categorical(design: Design, theta_cat: np.ndarray) -> np.ndarray:
    """Row-level prediction from intercept + factor effects."""
    yhat = np.full(design.n_obs, theta_cat[0])
    pos = 1
    for f in design.factors:
        effects = np.zeros(f.n_levels)
        keep = [i for i in range(f.n_levels) if i != f.reference]
        effects[keep] = theta_cat[pos : pos + len(keep)]
        yhat += effects[f.codes]
        pos += len(keep)
    return yhat


def _solve_absorbed(design: Design, demean_tol: float, max_sweeps: int) -> np.ndarray:
    """Absorption rail: returns theta in design column order."""
    c = design.covariates.shape[1]
    if c and design.factors:
        stacked = np.column_stack([design.y, design.covariates])
        demeaned = _demean(design, stacked, demean_tol, max_sweeps)
        beta = qr_lstsq(demeaned[:, 1:], demeaned[:, 0], column_names=design.covariate_names)
    elif c:
        # no factors: plain centered regression (global demeaning)
        yc = design.y - design.y.mean()
        cc = design.covariates - design.covariates.mean(axis=0)
        beta = qr_lstsq(cc, yc, column_names=design.covariate_names)
    else:
        beta = np.zeros(0)
    r = design.y - (design.covariates @ beta if c else 0.0)
    theta_cat = _categorical_normal_solve(design, r) if design.factors else np.array([r.mean()])
    return np.concatenate([theta_cat, beta])


def _solve_dense(design: Design) -> np.ndarray:
    X = design.dense_matrix()
    return qr_lstsq(X, design.y, column_names=design.column_names())


def predict(design: Design, theta: np.ndarray) -> np.ndarray:
    k_cat = 1 + sum(f.n_levels - 1 for f in design.factors)
    yhat = _predict_categorical(design, theta[:k_cat])
    if design.covariates.shape[1]:
        yhat = yhat + design.covariates @ theta[k_cat:]
    return yhat


def fit_ols_fe(
    design: Design,
    method: str = "auto",
    demean_tol: float = DEMEAN_TOL,
    max_sweeps: int = MAX_SWEEPS,
    cluster: bool = True,
) -> FittedModel:
    """Fit the design by the requested rail and attach CR1 clustered SEs.

    ``method``: "dense", "absorb", or "auto" (dense while the expanded
    matrix stays small). A zero-variance outcome short-circuits to the
    documented convention: slopes 0, intercept equal to the constant,
    R-squared 0, with a warning note.
    """
    from .inference import cluster_se  # local import to avoid a cycle

    names = design.column_names()
    k = design.n_params
    if design.n_obs <= k:
        raise FitError(f"{design.n_obs} observations cannot identify {k} parameters")

    notes = list(design.notes)
    sst = float(((design.y - design.y.mean()) ** 2).sum())
    if sst == 0.0:
        msg = "zero-variance outcome: slopes set to 0, R-squared defined as 0"
        warnings.warn(msg)
        notes.append(msg)
        theta = np.zeros(k)
        theta[0] = design.y[0] if design.n_obs else 0.0
        method_used = "degenerate"
    elif method == "dense" or (method == "auto" and design.n_obs * k <= DENSE_CELL_LIMIT):
        theta = _solve_dense(design)
        method_used = "dense"
    elif method in ("absorb", "auto"):
        theta = _solve_absorbed(design, demean_tol, max_sweeps)
        method_used = "absorb"
    else:
        raise FitError(f"unknown fit method {method!r}")

    fitted = predict(design, theta)
    residuals = design.y - fitted
    r2 = 0.0 if sst == 0.0 else 1.0 - float((residuals @ residuals)) / sst

    coefficients: dict[str, float] = {}
    se: dict[str, float] = {}
    if cluster and method_used != "degenerate":
        if design.n_clusters < 2:
            notes.append("clustered SEs skipped: fewer than 2 clusters")
        else:
            se_vec, se_notes = cluster_se(design, residuals)
            notes.extend(se_notes)
            se = {name: float(se_vec[i]) for i, name in enumerate(names)}
    coefficients["intercept"] = float(theta[0])
    pos = 1
    for f in design.factors:
        for lvl_idx, lvl in enumerate(f.levels):
            if lvl_idx == f.reference:
                coefficients[f"{f.name}[{lvl}]"] = 0.0  # reference, by construction
            else:
                coefficients[f"{f.name}[{lvl}]"] = float(theta[pos])
                pos += 1
    for j, name in enumerate(design.covariate_names):
        coefficients[name] = float(theta[pos + j])

    result = FitResult(
        coefficients=coefficients,
        se_clustered=se,
        r_squared=r2,
        n_obs=design.n_obs,
        n_clusters=design.n_clusters,
        reference_levels=design.reference_levels(),
        spec=design.spec,
        method=method_used,
        notes=notes,
    )
    return FittedModel(result=result, residuals=residuals, fitted=fitted, theta=theta)
