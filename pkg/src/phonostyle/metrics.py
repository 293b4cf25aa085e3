"""The six per-mesra phonetic texture measures.

Hardness and sonority are means of the per-symbol scalars; sibilance is
the share of strident consonants among consonants (undefined without
consonants); vowel ratio is vocalic occupancy; cluster ratio is the share
of symbols sitting in a within-word consonant adjacency; entropy is the
Shannon entropy (bits) of the symbol frequency distribution.

Two equivalent paths exist: readable per-mesra functions operating on
parsed streams, and a flat vectorized engine (``compute_metrics``) for
corpus-scale runs. Both must agree to 1e-12; the test suite enforces
this against independent brute-force recomputation.

Cluster membership is defined as: a symbol participates when it is a
consonant and at least one immediate neighbour inside the same word is a
consonant; word boundaries and unknown placeholders block adjacency. The
denominator is the count of segmental symbols in the mesra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import StreamError
from .phonology import (
    UNKNOWN_SYMBOL,
    FeatureTable,
    ParseMode,
    PhonemeFeature,
    RuleTable,
    StreamBatch,
    SymbolStream,
    UnknownPolicy,
    parse_stream,
    annotate,
)

METRIC_NAMES = ("hardness", "sonority", "sibilance", "vowel_ratio", "cluster_ratio", "entropy")


@dataclass(frozen=True)
class MetricVector:
    """All six measures for one mesra plus its length descriptors."""

    hardness: float
    sonority: float
    sibilance: float | None  # None when the mesra has no consonants
    vowel_ratio: float
    cluster_ratio: float
    entropy: float
    n_symbols: int
    n_tokens: int


def hardness(features: list[PhonemeFeature]) -> float:
    """Mean per-symbol hardness."""
    if not features:
        raise StreamError("hardness of an empty stream")
    total = 0.0
    for f in features:
        total += f.hardness
    return total / len(features)


def sonority(features: list[PhonemeFeature]) -> float:
    """Mean per-symbol sonority."""
    if not features:
        raise StreamError("sonority of an empty stream")
    total = 0.0
    for f in features:
        total += f.sonority
    return total / len(features)


def sibilance(features: list[PhonemeFeature]) -> float | None:
    """Strident consonants over consonants; None when no consonants."""
    n_cons = sum(1 for f in features if f.is_consonant)
    if n_cons == 0:
        return None
    n_strident = sum(1 for f in features if f.is_consonant and f.strident)
    return n_strident / n_cons


def vowel_ratio(features: list[PhonemeFeature]) -> float:
    """Vowel share among segmental symbols."""
    if not features:
        raise StreamError("vowel_ratio of an empty stream")
    return sum(1 for f in features if f.is_vowel) / len(features)


def cluster_ratio(stream: SymbolStream, features: list[PhonemeFeature]) -> float:
    """Share of symbols participating in a within-word consonant bigram.

    Adjacency never crosses a word boundary; unknown placeholders are
    opaque (they block adjacency and do not count as consonants).
    """
    if not features:
        raise StreamError("cluster_ratio of an empty stream")
    # consonant flag per stream position (placeholders are not consonants)
    feats = iter(features)
    cons: list[bool] = []
    for sym in stream.symbols:
        if sym == UNKNOWN_SYMBOL:
            cons.append(False)
        else:
            cons.append(next(feats).is_consonant)
    boundary_before = set(stream.boundaries)
    member = 0
    for i, c in enumerate(cons):
        if not c:
            continue
        left_ok = i > 0 and cons[i - 1] and i not in boundary_before
        right_ok = i + 1 < len(cons) and cons[i + 1] and (i + 1) not in boundary_before
        if left_ok or right_ok:
            member += 1
    return member / len(features)


def entropy(stream: SymbolStream) -> float:
    """Shannon entropy in bits of the segmental symbol distribution."""
    counts: dict[str, int] = {}
    for sym in stream.symbols:
        if sym != UNKNOWN_SYMBOL:
            counts[sym] = counts.get(sym, 0) + 1
    n = sum(counts.values())
    if n == 0:
        raise StreamError("entropy of an empty stream")
    acc = 0.0
    for c in counts.values():
        p = c / n
        acc -= p * math.log2(p)
    return acc


def metric_vector(
    text_norm: str,
    table: FeatureTable,
    mode: ParseMode = ParseMode.PREPHONEMIZED,
    policy: UnknownPolicy = UnknownPolicy.STRICT,
    rules: RuleTable | None = None,
) -> MetricVector:
    """Parse one mesra and bundle all six measures."""
    stream = parse_stream(text_norm, table, mode=mode, policy=policy, rules=rules)
    return metric_vector_from_stream(stream, table)


def metric_vector_from_stream(stream: SymbolStream, table: FeatureTable) -> MetricVector:
    features = annotate(stream, table)
    return MetricVector(
        hardness=hardness(features),
        sonority=sonority(features),
        sibilance=sibilance(features),
        vowel_ratio=vowel_ratio(features),
        cluster_ratio=cluster_ratio(stream, features),
        entropy=entropy(stream),
        n_symbols=stream.n_symbols,
        n_tokens=stream.n_tokens,
    )


def compute_metrics(batch: StreamBatch, table: FeatureTable) -> pd.DataFrame:
    """Vectorized metric computation over an encoded batch.

    Returns one row per kept mesra, aligned with the batch's kept order.
    Sibilance is NaN where the mesra has no consonants. Per-row sums run
    left to right exactly like the per-mesra reference functions, so both
    paths agree to float rounding.
    """
    codes = batch.codes
    offsets = batch.offsets
    n = batch.n_rows
    if n == 0:
        return pd.DataFrame({k: np.array([]) for k in METRIC_NAMES + ("n_symbols", "n_tokens")})
    starts = offsets[:-1]

    counted = table.is_counted_arr[codes]
    n_seg = np.add.reduceat(counted.astype(np.int64), starts)
    non_boundary = codes != table.boundary_code
    n_symbols = np.add.reduceat(non_boundary.astype(np.int64), starts)
    n_tokens = np.add.reduceat((~non_boundary).astype(np.int64), starts) + 1

    hard_sum = np.add.reduceat(table.hardness_arr[codes], starts)
    son_sum = np.add.reduceat(table.sonority_arr[codes], starts)
    n_vow = np.add.reduceat(table.is_vowel_arr[codes].astype(np.int64), starts)
    cons_mask = table.is_consonant_arr[codes]
    n_cons = np.add.reduceat(cons_mask.astype(np.int64), starts)
    n_strid = np.add.reduceat(table.is_strident_arr[codes].astype(np.int64), starts)

    seg = n_seg.astype(np.float64)
    hard = hard_sum / seg
    son = son_sum / seg
    vow = n_vow / seg
    with np.errstate(invalid="ignore", divide="ignore"):
        sib = np.where(n_cons > 0, n_strid / np.maximum(n_cons, 1), np.nan)

    # cluster membership: consonant with a same-word consonant neighbour
    total = len(codes)
    member = np.zeros(total, dtype=bool)
    if total > 1:
        pair = cons_mask[:-1] & cons_mask[1:]
        if n > 1:
            pair[offsets[1:-1] - 1] = False  # pairs straddling row ends
        member[:-1] |= pair
        member[1:] |= pair
    n_member = np.add.reduceat(member.astype(np.int64), starts)
    clus = n_member / seg

    ent = _entropy_rows(codes, offsets, counted, n_seg, len(table.is_counted_arr))

    return pd.DataFrame(
        {
            "hardness": hard,
            "sonority": son,
            "sibilance": sib,
            "vowel_ratio": vow,
            "cluster_ratio": clus,
            "entropy": ent,
            "n_symbols": n_symbols,
            "n_tokens": n_tokens,
        }
    )


def _entropy_rows(
    codes: np.ndarray,
    offsets: np.ndarray,
    counted: np.ndarray,
    n_seg: np.ndarray,
    alphabet: int,
) -> np.ndarray:
    """Per-row Shannon entropy via sort + run-length counting."""
    n = len(offsets) - 1
    row_ids = np.repeat(np.arange(n, dtype=np.int64), np.diff(offsets))
    rows_nb = row_ids[counted]
    codes_nb = codes[counted].astype(np.int64)
    comb = rows_nb * alphabet + codes_nb
    comb.sort(kind="stable")
    is_start = np.empty(len(comb), dtype=bool)
    is_start[0] = True
    np.not_equal(comb[1:], comb[:-1], out=is_start[1:])
    run_starts = np.flatnonzero(is_start)
    run_counts = np.diff(np.append(run_starts, len(comb)))
    run_rows = comb[run_starts] // alphabet
    p = run_counts / n_seg[run_rows]
    terms = -p * np.log2(p)
    return np.bincount(run_rows, weights=terms, minlength=n)


def fsum_mean(values: np.ndarray) -> float:
    """Exactly rounded mean (compensated summation)."""
    if len(values) == 0:
        raise ValueError("mean of empty array")
    return math.fsum(values) / len(values)


def grouped_means(values: np.ndarray, group_codes: np.ndarray, n_groups: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-group compensated means; order independent by construction.

    NaN entries are excluded pairwise. Groups with no defined values get
    NaN means and count 0.
    """
    values = np.asarray(values, dtype=np.float64)
    group_codes = np.asarray(group_codes, dtype=np.int64)
    defined = ~np.isnan(values)
    v = values[defined]
    g = group_codes[defined]
    order = np.argsort(g, kind="stable")
    v = v[order]
    g = g[order]
    counts = np.bincount(g, minlength=n_groups)
    means = np.full(n_groups, np.nan)
    bounds = np.concatenate(([0], np.cumsum(counts)))
    for k in range(n_groups):
        lo, hi = bounds[k], bounds[k + 1]
        if hi > lo:
            means[k] = math.fsum(v[lo:hi]) / (hi - lo)
    return means, counts
