"""Model specification and design construction.

A design is a compact description, never a dense matrix: categorical
factors stay as integer code vectors with a deterministic reference level
(the lexicographically smallest level), covariates are centered, and the
implied column layout is ``intercept, factor blocks (levels minus
reference, sorted), covariates``. Row order is fixed by
``(poet_id, poem_id, line_index)`` so repeated runs see identical input
order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import DesignError, SchemaError

PRIMARY_OUTCOMES = ("hardness", "sonority", "sibilance")
FACTOR_COLUMNS = {"poet": "poet_id", "meter": "meter", "form": "form"}
COVARIATE_COLUMNS = ("n_symbols", "n_tokens")


@dataclass(frozen=True)
class ModelSpec:
    """One controlled regression: outcome on factors plus length controls."""

    outcome: str
    fixed_effects: tuple[str, ...] = ("poet", "meter", "form")
    covariates: tuple[str, ...] = ("n_symbols", "n_tokens")
    cluster: str = "poem"
    subset_meter: str | None = None

    def __post_init__(self) -> None:
        if self.outcome not in PRIMARY_OUTCOMES:
            raise SchemaError(f"outcome must be one of {PRIMARY_OUTCOMES}, got {self.outcome!r}")
        for f in self.fixed_effects:
            if f not in FACTOR_COLUMNS:
                raise SchemaError(f"unknown fixed effect {f!r}")
        if len(set(self.fixed_effects)) != len(self.fixed_effects):
            raise SchemaError("duplicate fixed effects")
        for c in self.covariates:
            if c not in COVARIATE_COLUMNS:
                raise SchemaError(f"unknown covariate {c!r}")
        if self.cluster != "poem":
            raise SchemaError("only poem-level clustering is supported")
        if self.subset_meter is not None and "meter" in self.fixed_effects:
            raise SchemaError("meter cannot be a fixed effect inside a single-meter subset")

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "fixed_effects": list(self.fixed_effects),
            "covariates": list(self.covariates),
            "cluster": self.cluster,
            "subset_meter": self.subset_meter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            outcome=d["outcome"],
            fixed_effects=tuple(d.get("fixed_effects", ("poet", "meter", "form"))),
            covariates=tuple(d.get("covariates", ("n_symbols", "n_tokens"))),
            cluster=d.get("cluster", "poem"),
            subset_meter=d.get("subset_meter"),
        )


@dataclass
class Factor:
    """One dummy-encoded categorical: integer codes against sorted levels."""

    name: str
    levels: list[str]
    codes: np.ndarray  # int32, index into levels
    reference: int = 0  # lexicographically smallest level

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def reference_level(self) -> str:
        return self.levels[self.reference]

    def column_names(self) -> list[str]:
        return [f"{self.name}[{lvl}]" for i, lvl in enumerate(self.levels) if i != self.reference]


@dataclass
class Design:
    """Everything a fit needs, in fixed row order."""

    y: np.ndarray
    factors: list[Factor]
    covariates: np.ndarray  # (n, c) centered
    covariate_names: list[str]
    covariate_means: np.ndarray
    cluster_codes: np.ndarray
    n_clusters: int
    outcome: str
    spec: ModelSpec | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def n_obs(self) -> int:
        return len(self.y)

    @property
    def n_params(self) -> int:
        return 1 + sum(f.n_levels - 1 for f in self.factors) + len(self.covariate_names)

    def column_names(self) -> list[str]:
        names = ["intercept"]
        for f in self.factors:
            names.extend(f.column_names())
        names.extend(self.covariate_names)
        return names

    def dense_matrix(self) -> np.ndarray:
        """Materialize the dummy-expanded matrix (small problems only)."""
        n, k = self.n_obs, self.n_params
        if n * k > 50_000_000:
            raise DesignError(f"dense design too large: {n} x {k}")
        X = np.zeros((n, k))
        X[:, 0] = 1.0
        col = 1
        for f in self.factors:
            for lvl_idx in range(f.n_levels):
                if lvl_idx == f.reference:
                    continue
                X[:, col] = f.codes == lvl_idx
                col += 1
        if len(self.covariate_names):
            X[:, col:] = self.covariates
        return X

    def reference_levels(self) -> dict[str, str]:
        return {f.name: f.reference_level for f in self.factors}


def _encode_factor(name: str, values: pd.Series) -> Factor:
    levels = sorted(values.unique())
    if len(levels) < 2:
        raise DesignError(f"factor {name!r} has a single level: {levels}")
    lookup = {lvl: i for i, lvl in enumerate(levels)}
    codes = values.map(lookup).to_numpy(dtype=np.int32)
    return Factor(name=name, levels=list(levels), codes=codes)


def build_design_frame(
    df: pd.DataFrame,
    outcome: str,
    factor_columns: list[tuple[str, str]],
    covariates: tuple[str, ...],
    subset_meter: str | None = None,
    spec: ModelSpec | None = None,
) -> Design:
    """Core design builder over arbitrary factor columns.

    Rows with an undefined outcome are dropped; rows are sorted by
    (poet_id, poem_id, line_index); covariates are centered; the poem
    cluster key is (poet_id, poem_id).
    """
    required = {"poet_id", "poem_id", "line_index", outcome}
    required.update(col for _, col in factor_columns)
    required.update(covariates)
    missing = sorted(required - set(df.columns))
    if missing:
        raise SchemaError(f"metric rows missing columns {missing}")

    notes: list[str] = []
    work = df
    if subset_meter is not None:
        work = work[work["meter"] == subset_meter]
        if work.empty:
            raise DesignError(f"no rows for meter {subset_meter!r}")
    n_undefined = int(work[outcome].isna().sum())
    if n_undefined:
        work = work[work[outcome].notna()]
        notes.append(f"dropped {n_undefined} rows with undefined {outcome}")
    if work.empty:
        raise DesignError("no rows left after filtering")
    work = work.sort_values(["poet_id", "poem_id", "line_index"], kind="mergesort")

    y = work[outcome].to_numpy(dtype=np.float64)
    factors = [_encode_factor(name, work[col].astype(str)) for name, col in factor_columns]

    cov = work[list(covariates)].to_numpy(dtype=np.float64) if covariates else np.zeros((len(work), 0))
    means = cov.mean(axis=0) if cov.size else np.zeros(0)
    cov = cov - means

    poem_keys = work["poet_id"].astype(str) + "\x1f" + work["poem_id"].astype(str)
    cluster_levels, cluster_codes = np.unique(poem_keys.to_numpy(), return_inverse=True)

    return Design(
        y=y,
        factors=factors,
        covariates=cov,
        covariate_names=list(covariates),
        covariate_means=means,
        cluster_codes=cluster_codes.astype(np.int64),
        n_clusters=len(cluster_levels),
        outcome=outcome,
        spec=spec,
        notes=notes,
    )


def build_design(df: pd.DataFrame, spec: ModelSpec) -> Design:
    """Build the design for one controlled regression spec."""
    return build_design_frame(
        df,
        outcome=spec.outcome,
        factor_columns=[(f, FACTOR_COLUMNS[f]) for f in spec.fixed_effects],
        covariates=spec.covariates,
        subset_meter=spec.subset_meter,
        spec=spec,
    )
