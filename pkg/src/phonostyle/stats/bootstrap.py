"""Poem bootstrap of century-level metric means.

Poems are the resampling unit: each metric is averaged within poems
first (one value per poem, no length weighting), centuries are strata
that never mix, and the 95% band is the 2.5/97.5 percentile of the
replicate century means. Replicate r draws its RNG stream from
``seed XOR r``, so output is byte-identical for any worker count and any
scheduling.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import DesignError
from ..metrics import METRIC_NAMES, grouped_means

log = logging.getLogger(__name__)

_SEED_MASK = (1 << 64) - 1


@dataclass
class BootstrapTrend:
    """Century -> (mean, ci_low, ci_high, n_poems) for each metric."""

    replicates: int
    seed: int
    min_poems: int
    centuries: list[int]
    trend: dict[str, dict[int, dict[str, float]]]
    excluded_centuries: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        def clean(cell: dict[str, float]) -> dict[str, float | int | None]:
            # undefined cells (e.g. a metric with no defined poem means)
            # serialize as null, not as a bare NaN token
            return {
                k: (None if isinstance(v, float) and not np.isfinite(v) else v)
                for k, v in cell.items()
            }

        return {
            "replicates": self.replicates,
            "seed": self.seed,
            "min_poems": self.min_poems,
            "centuries": self.centuries,
            "excluded_centuries": self.excluded_centuries,
            "trend": {m: {str(c): clean(cell) for c, cell in per.items()} for m, per in self.trend.items()},
        }

    def frame(self) -> pd.DataFrame:
        rows = []
        for metric, per in self.trend.items():
            for century, cell in per.items():
                rows.append({"metric": metric, "century": century, **cell})
        return pd.DataFrame(rows).sort_values(["metric", "century"]).reset_index(drop=True)


def _poem_mean_matrix(df: pd.DataFrame) -> tuple[np.ndarray, np.ndarray]:
    """One row per poem: metric means and the poem's century."""
    key = df["poet_id"].astype(str) + "\x1f" + df["poem_id"].astype(str)
    levels, codes = np.unique(key.to_numpy(), return_inverse=True)
    n_poems = len(levels)
    means = np.empty((n_poems, len(METRIC_NAMES)))
    for j, metric in enumerate(METRIC_NAMES):
        means[:, j], _ = grouped_means(df[metric].to_numpy(dtype=np.float64), codes, n_poems)
    centuries = np.zeros(n_poems, dtype=np.int64)
    centuries[codes] = df["century"].to_numpy(dtype=np.int64)
    return means, centuries


def _replicate_means(vals_by_century: list[np.ndarray], seed: int, rep: int) -> np.ndarray:
    """One replicate: resample poems with replacement inside each century."""
    rng = np.random.default_rng((seed ^ rep) & _SEED_MASK)
    out = np.empty((len(vals_by_century), vals_by_century[0].shape[1]))
    for ci, vals in enumerate(vals_by_century):
        idx = rng.integers(0, len(vals), len(vals))
        with np.errstate(invalid="ignore"):
            out[ci] = np.nanmean(vals[idx], axis=0)
    return out


def bootstrap_century(
    df: pd.DataFrame,
    replicates: int = 1000,
    seed: int = 42,
    min_poems: int = 5,
    threads: int = 1,
) -> BootstrapTrend:
    """Descriptive century trends with percentile uncertainty bands.

    ``df`` is the metric table (one row per mesra with century metadata);
    rows without century are ignored, and centuries with fewer than
    ``min_poems`` poems are excluded with a warning.
    """
    if replicates < 100:
        raise DesignError("bootstrap needs at least 100 replicates")
    if "century" not in df.columns:
        raise DesignError("metric rows carry no century column")
    work = df[df["century"].notna()]
    if work.empty:
        raise DesignError("no rows with century metadata")

    poem_means, poem_century = _poem_mean_matrix(work)
    centuries = sorted(np.unique(poem_century).tolist())
    vals_by_century: list[np.ndarray] = []
    kept_centuries: list[int] = []
    excluded: list[int] = []
    for c in centuries:
        vals = poem_means[poem_century == c]
        if len(vals) < min_poems:
            excluded.append(int(c))
            log.warning("century %s has %d poems (< %d); excluded", c, len(vals), min_poems)
            continue
        kept_centuries.append(int(c))
        vals_by_century.append(vals)
    if not kept_centuries:
        raise DesignError("no century retains the minimum poem support")

    # point estimates on the original sample: poem-mean-then-century-mean
    with np.errstate(invalid="ignore"):
        point = np.vstack([np.nanmean(v, axis=0) for v in vals_by_century])
        n_defined = np.vstack([np.sum(~np.isnan(v), axis=0) for v in vals_by_century])

    rep_means = np.empty((replicates, len(kept_centuries), len(METRIC_NAMES)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rep, res in enumerate(pool.map(lambda r: _replicate_means(vals_by_century, seed, r), range(replicates))):
                rep_means[rep] = res
    else:
        for rep in range(replicates):
            rep_means[rep] = _replicate_means(vals_by_century, seed, rep)

    with np.errstate(invalid="ignore"):
        lo = np.nanquantile(rep_means, 0.025, axis=0)
        hi = np.nanquantile(rep_means, 0.975, axis=0)

    trend: dict[str, dict[int, dict[str, float]]] = {}
    for j, metric in enumerate(METRIC_NAMES):
        per: dict[int, dict[str, float]] = {}
        for ci, c in enumerate(kept_centuries):
            per[c] = {
                "mean": float(point[ci, j]),
                "ci_low": float(lo[ci, j]),
                "ci_high": float(hi[ci, j]),
                "n_poems": int(len(vals_by_century[ci])),
                "n_poems_defined": int(n_defined[ci, j]),
            }
        trend[metric] = per
    return BootstrapTrend(
        replicates=replicates,
        seed=seed,
        min_poems=min_poems,
        centuries=kept_centuries,
        trend=trend,
        excluded_centuries=excluded,
    )
