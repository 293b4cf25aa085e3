"""Poet profiles, meter profiles and the PCA style space.

Poet fingerprints use min-max normalization to a shared 0-1 range per
metric (the poet with the highest raw mean gets 1, the lowest 0; a
metric constant across poets maps everyone to 0.5). Models elsewhere run
on unnormalized values; normalization exists only for comparative
display. Meter profiles average within poems first so long poems do not
dominate. The style space is a PCA of the z-standardized poet-level
means (correlation structure, not covariance, because the six metrics
have incommensurate scales).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DesignError
from .metrics import METRIC_NAMES, grouped_means

log = logging.getLogger(__name__)

METER_PROFILE_METRICS = ("hardness", "sonority", "sibilance", "entropy")


@dataclass
class PoetProfile:
    poet_id: str
    raw: dict[str, float | None]
    normalized: dict[str, float | None]
    n_mesras: int
    n_poems: int


@dataclass
class MeterProfile:
    meter: str
    n_poems: int
    n_mesras: int
    poem_level_means: dict[str, float]


@dataclass
class Projection:
    """Orthonormal loadings over the standardized metrics plus coordinates."""

    metric_names: list[str]
    loadings: np.ndarray  # (n_metrics_kept, n_components), columns orthonormal
    explained_variance_ratio: np.ndarray
    poet_ids: list[str]
    coordinates: np.ndarray  # (n_poets, n_components)
    dropped_metrics: list[str] = field(default_factory=list)
    excluded_poets: list[str] = field(default_factory=list)
    column_means: np.ndarray | None = None
    column_sds: np.ndarray | None = None

    def coordinate_pairs(self) -> dict[str, tuple[float, float]]:
        """(PC1, PC2) per poet; PC2 is 0 when only one component exists."""
        out: dict[str, tuple[float, float]] = {}
        for i, poet in enumerate(self.poet_ids):
            pc1 = float(self.coordinates[i, 0])
            pc2 = float(self.coordinates[i, 1]) if self.coordinates.shape[1] > 1 else 0.0
            out[poet] = (pc1, pc2)
        return out

    def to_dict(self) -> dict:
        return {
            "metric_names": self.metric_names,
            "loadings": {
                m: [float(v) for v in self.loadings[i]] for i, m in enumerate(self.metric_names)
            },
            "explained_variance_ratio": [float(v) for v in self.explained_variance_ratio],
            "coordinates": {p: [float(v) for v in self.coordinates[i]] for i, p in enumerate(self.poet_ids)},
            "dropped_metrics": self.dropped_metrics,
            "excluded_poets": self.excluded_poets,
        }


def poet_profiles(df: pd.DataFrame) -> list[PoetProfile]:
    """Per-poet raw metric means plus shared 0-1 normalized values.

    Sibilance means run over defined rows only; a poet with no defined
    rows gets None for both raw and normalized sibilance.
    """
    poets = sorted(df["poet_id"].unique())
    if len(poets) < 2:
        raise DesignError("poet profiles need at least 2 poets (normalization undefined)")
    lookup = {p: i for i, p in enumerate(poets)}
    codes = df["poet_id"].map(lookup).to_numpy(dtype=np.int64)

    raw: dict[str, np.ndarray] = {}
    for metric in METRIC_NAMES:
        means, _ = grouped_means(df[metric].to_numpy(dtype=np.float64), codes, len(poets))
        raw[metric] = means

    normalized: dict[str, np.ndarray] = {}
    for metric, means in raw.items():
        defined = ~np.isnan(means)
        norm = np.full(len(poets), np.nan)
        if defined.any():
            lo, hi = means[defined].min(), means[defined].max()
            if hi > lo:
                norm[defined] = (means[defined] - lo) / (hi - lo)
            else:
                norm[defined] = 0.5  # constant across poets: declared tie value
        normalized[metric] = norm

    n_mesras = np.bincount(codes, minlength=len(poets))
    poem_key = df["poet_id"].astype(str) + "\x1f" + df["poem_id"].astype(str)
    poems_per_poet = poem_key.groupby(df["poet_id"]).nunique()

    profiles = []
    for i, poet in enumerate(poets):
        profiles.append(
            PoetProfile(
                poet_id=poet,
                raw={m: (None if np.isnan(raw[m][i]) else float(raw[m][i])) for m in METRIC_NAMES},
                normalized={
                    m: (None if np.isnan(normalized[m][i]) else float(normalized[m][i]))
                    for m in METRIC_NAMES
                },
                n_mesras=int(n_mesras[i]),
                n_poems=int(poems_per_poet[poet]),
            )
        )
    return profiles


def profiles_frame(profiles: list[PoetProfile]) -> pd.DataFrame:
    rows = []
    for p in profiles:
        row: dict[str, object] = {"poet_id": p.poet_id, "n_mesras": p.n_mesras, "n_poems": p.n_poems}
        for m in METRIC_NAMES:
            row[f"{m}_raw"] = p.raw[m]
            row[f"{m}_norm"] = p.normalized[m]
        rows.append(row)
    return pd.DataFrame(rows)


def meter_profiles(df: pd.DataFrame) -> list[MeterProfile]:
    """Poem-level metric means per meter (each poem counts once)."""
    out: list[MeterProfile] = []
    for meter in sorted(df["meter"].unique()):
        sub = df[df["meter"] == meter]
        poem_key = (sub["poet_id"].astype(str) + "\x1f" + sub["poem_id"].astype(str)).to_numpy()
        levels, codes = np.unique(poem_key, return_inverse=True)
        means: dict[str, float] = {}
        for metric in METER_PROFILE_METRICS:
            poem_means, _ = grouped_means(sub[metric].to_numpy(dtype=np.float64), codes, len(levels))
            defined = poem_means[~np.isnan(poem_means)]
            means[metric] = math.fsum(defined) / len(defined) if len(defined) else float("nan")
        out.append(
            MeterProfile(
                meter=meter,
                n_poems=len(levels),
                n_mesras=len(sub),
                poem_level_means=means,
            )
        )
    return out


def meter_profiles_frame(profiles: list[MeterProfile]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"meter": p.meter, "n_poems": p.n_poems, "n_mesras": p.n_mesras, **p.poem_level_means}
            for p in profiles
        ]
    )


def pca_project(profiles: list[PoetProfile]) -> Projection:
    """Project poet-level means into the PCA style space.

    Columns are z-standardized across poets (zero-variance metrics are
    dropped with a warning); poets with an undefined metric are excluded
    with a warning rather than imputed. Components are sorted by
    eigenvalue; within each component the largest-magnitude loading is
    made positive.
    """
    usable = [p for p in profiles if all(p.raw[m] is not None for m in METRIC_NAMES)]
    usable_ids = {p.poet_id for p in usable}
    excluded = sorted(p.poet_id for p in profiles if p.poet_id not in usable_ids)
    for poet in excluded:
        log.warning("poet %s excluded from PCA (undefined metric mean)", poet)
    if len(usable) < 3:
        raise DesignError(f"PCA needs at least 3 poets with complete profiles, got {len(usable)}")
    usable = sorted(usable, key=lambda p: p.poet_id)
    poet_ids = [p.poet_id for p in usable]
    X = np.array([[p.raw[m] for m in METRIC_NAMES] for p in usable], dtype=np.float64)

    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=1)
    keep = sds > 0.0
    dropped = [m for m, k in zip(METRIC_NAMES, keep) if not k]
    for m in dropped:
        log.warning("metric %s constant across poets; dropped from PCA", m)
    if not keep.any():
        raise DesignError("all metrics constant across poets; PCA undefined")
    kept_names = [m for m, k in zip(METRIC_NAMES, keep) if k]
    Z = (X[:, keep] - means[keep]) / sds[keep]

    corr = (Z.T @ Z) / (len(usable) - 1)
    eigvals, eigvecs = np.linalg.eigh(corr)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    # sign convention: dominant loading of each component positive
    for j in range(eigvecs.shape[1]):
        pivot = int(np.argmax(np.abs(eigvecs[:, j])))
        if eigvecs[pivot, j] < 0:
            eigvecs[:, j] = -eigvecs[:, j]
    ratios = np.maximum(eigvals, 0.0)
    ratios = ratios / ratios.sum()
    coords = Z @ eigvecs

    return Projection(
        metric_names=kept_names,
        loadings=eigvecs,
        explained_variance_ratio=ratios,
        poet_ids=poet_ids,
        coordinates=coords,
        dropped_metrics=dropped,
        excluded_poets=excluded,
        column_means=means[keep],
        column_sds=sds[keep],
    )
