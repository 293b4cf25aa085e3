"""Metric correctness against independent brute-force recomputation.

The oracles below recompute every measure from the raw token list with
plain loops and dict counting; they never touch the package's stream or
batch machinery beyond the shared feature table.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from phonostyle.errors import StreamError
from phonostyle.metrics import (
    METRIC_NAMES,
    cluster_ratio,
    compute_metrics,
    entropy,
    fsum_mean,
    grouped_means,
    hardness,
    metric_vector,
    sibilance,
    sonority,
    vowel_ratio,
)
from phonostyle.phonology import annotate, encode_batch, parse_stream

from conftest import random_stream_text


# ------------------------------------------------------------------ oracles


def oracle_metrics(text: str, table) -> dict[str, float | None]:
    """Brute-force recomputation from the whitespace token list."""
    tokens = text.split()
    words: list[list[str]] = [[]]
    for tok in tokens:
        if tok == "#":
            if words[-1]:
                words.append([])
        else:
            words[-1].append(tok)
    words = [w for w in words if w]
    syms = [s for w in words for s in w]
    feats = {s: table.entries[s] for s in set(syms)}

    hard_sum = 0.0
    son_sum = 0.0
    for s in syms:
        hard_sum += feats[s].hardness
    for s in syms:
        son_sum += feats[s].sonority
    n = len(syms)
    n_cons = sum(1 for s in syms if feats[s].segment_class.value != "VOWEL")
    n_strid = sum(1 for s in syms if feats[s].strident)
    n_vow = n - n_cons

    member = 0
    for w in words:
        for i, s in enumerate(w):
            if feats[s].segment_class.value == "VOWEL":
                continue
            left = i > 0 and feats[w[i - 1]].segment_class.value != "VOWEL"
            right = i + 1 < len(w) and feats[w[i + 1]].segment_class.value != "VOWEL"
            if left or right:
                member += 1

    counts: dict[str, int] = {}
    for s in syms:
        counts[s] = counts.get(s, 0) + 1
    ent = -sum((c / n) * math.log2(c / n) for c in counts.values())

    return {
        "hardness": hard_sum / n,
        "sonority": son_sum / n,
        "sibilance": (n_strid / n_cons) if n_cons else None,
        "vowel_ratio": n_vow / n,
        "cluster_ratio": member / n,
        "entropy": ent,
        "n_symbols": n,
        "n_tokens": len(words),
    }


# ----------------------------------------------------------- stated examples


def test_hardness_examples(table):
    all_vowel = annotate(parse_stream("a e i o u", table), table)
    assert hardness(all_vowel) == 0.5
    # hand mean of shipped values: t=3.5, a=0.5
    assert hardness(annotate(parse_stream("t a", table), table)) == 2.0


def test_sonority_examples(table):
    assert sonority(annotate(parse_stream("a a a", table), table)) == 5.0
    assert sonority(annotate(parse_stream("t k b d", table), table)) == 1.0


def test_sibilance_examples(table):
    feats = annotate(parse_stream("s t a", table), table)
    assert sibilance(feats) == 0.5
    assert sibilance(annotate(parse_stream("a e i", table), table)) is None


def test_vowel_ratio_examples(table):
    assert vowel_ratio(annotate(parse_stream("a e", table), table)) == 1.0
    assert vowel_ratio(annotate(parse_stream("t s", table), table)) == 0.0


def test_cluster_ratio_examples(table):
    s = parse_stream("s t a", table)
    assert cluster_ratio(s, annotate(s, table)) == pytest.approx(2 / 3)
    s = parse_stream("s # t a", table)
    assert cluster_ratio(s, annotate(s, table)) == 0.0


def test_entropy_examples(table):
    assert entropy(parse_stream("a a a a", table)) == 0.0
    assert entropy(parse_stream("a t", table)) == 1.0


def test_empty_stream_errors(table):
    with pytest.raises(StreamError):
        hardness([])
    with pytest.raises(StreamError):
        parse_stream("#", table)


def test_metric_vector_bundles_everything(table):
    mv = metric_vector("s a l # a m", table)
    exp = oracle_metrics("s a l # a m", table)
    assert mv.hardness == pytest.approx(exp["hardness"], abs=1e-12)
    assert mv.n_symbols == 5 and mv.n_tokens == 2


# ------------------------------------------------------------ oracle sweeps


def test_oracle_equivalence_per_mesra(table):
    rng = np.random.default_rng(42)
    symbols = sorted(table.entries)
    for _ in range(2000):
        text = random_stream_text(rng, symbols)
        mv = metric_vector(text, table)
        exp = oracle_metrics(text, table)
        assert mv.hardness == pytest.approx(exp["hardness"], abs=1e-12)
        assert mv.sonority == pytest.approx(exp["sonority"], abs=1e-12)
        assert mv.vowel_ratio == pytest.approx(exp["vowel_ratio"], abs=1e-12)
        assert mv.cluster_ratio == pytest.approx(exp["cluster_ratio"], abs=1e-12)
        assert mv.entropy == pytest.approx(exp["entropy"], abs=1e-12)
        if exp["sibilance"] is None:
            assert mv.sibilance is None
        else:
            assert mv.sibilance == pytest.approx(exp["sibilance"], abs=1e-12)
        assert mv.n_symbols == exp["n_symbols"]
        assert mv.n_tokens == exp["n_tokens"]


def test_bulk_engine_matches_oracle(table):
    rng = np.random.default_rng(43)
    symbols = sorted(table.entries)
    texts = [random_stream_text(rng, symbols) for _ in range(3000)]
    frame = compute_metrics(encode_batch(texts, table), table)
    for i in (0, 1, 17, 500, 1234, 2999):
        exp = oracle_metrics(texts[i], table)
        for name in ("hardness", "sonority", "vowel_ratio", "cluster_ratio", "entropy"):
            assert frame[name][i] == pytest.approx(exp[name], abs=1e-12)
    # and in full against the per-mesra implementation
    for name in METRIC_NAMES:
        per_row = []
        for t in texts:
            mv = metric_vector(t, table)
            v = getattr(mv, name)
            per_row.append(np.nan if v is None else v)
        np.testing.assert_allclose(frame[name].to_numpy(), np.array(per_row), atol=1e-12, rtol=0)


# ------------------------------------------------------------- properties


def test_permutation_invariance_except_cluster(table):
    rng = np.random.default_rng(5)
    symbols = sorted(table.entries)
    for _ in range(200):
        text = random_stream_text(rng, symbols, boundary_p=0.0)
        toks = text.split()
        perm = [toks[i] for i in rng.permutation(len(toks))]
        a = metric_vector(" ".join(toks), table)
        b = metric_vector(" ".join(perm), table)
        for name in ("hardness", "sonority", "sibilance", "vowel_ratio", "entropy"):
            va, vb = getattr(a, name), getattr(b, name)
            if va is None:
                assert vb is None
            else:
                assert va == pytest.approx(vb, abs=1e-12)
    # cluster_ratio is order sensitive: exhibit a counterexample
    a = metric_vector("t k a", table)
    b = metric_vector("t a k", table)
    assert a.cluster_ratio != b.cluster_ratio


def test_self_concatenation_invariance(table):
    rng = np.random.default_rng(6)
    symbols = sorted(table.entries)
    for _ in range(200):
        text = random_stream_text(rng, symbols, boundary_p=0.0)
        double = text + " " + text
        a, b = metric_vector(text, table), metric_vector(double, table)
        for name in ("hardness", "sonority", "sibilance", "vowel_ratio", "entropy"):
            va, vb = getattr(a, name), getattr(b, name)
            if va is None:
                assert vb is None
            else:
                assert va == pytest.approx(vb, abs=1e-12)


def test_metric_bounds_bulk(table):
    rng = np.random.default_rng(8)
    symbols = sorted(table.entries)
    texts = [random_stream_text(rng, symbols) for _ in range(20000)]
    frame = compute_metrics(encode_batch(texts, table), table)
    hmin = min(f.hardness for f in table.entries.values())
    hmax = max(f.hardness for f in table.entries.values())
    assert frame["hardness"].between(hmin, hmax).all()
    assert frame["sonority"].between(1.0, 5.0).all()
    sib = frame["sibilance"].dropna()
    assert sib.between(0.0, 1.0).all()
    assert frame["vowel_ratio"].between(0.0, 1.0).all()
    assert frame["cluster_ratio"].between(0.0, 1.0).all()
    assert (frame["entropy"] >= 0).all()
    # vowel_ratio + consonant share == 1 over non-boundary symbols
    batch = encode_batch(texts, table)
    n_cons = []
    for i in range(len(texts)):
        codes = batch.codes[batch.offsets[i] : batch.offsets[i + 1]]
        n_cons.append(int(table.is_consonant_arr[codes].sum()))
    np.testing.assert_allclose(
        frame["vowel_ratio"].to_numpy() + np.array(n_cons) / frame["n_symbols"].to_numpy(),
        1.0,
        atol=1e-12,
        rtol=0,
    )


def test_entropy_bound_by_distinct_count(table):
    rng = np.random.default_rng(9)
    symbols = sorted(table.entries)
    for _ in range(2000):
        text = random_stream_text(rng, symbols)
        mv = metric_vector(text, table)
        distinct = len(set(text.split()) - {"#"})
        assert mv.entropy <= math.log2(distinct) + 1e-12


def test_grouped_means_matches_two_pass_oracle():
    rng = np.random.default_rng(10)
    values = rng.normal(size=5000)
    values[rng.integers(0, 5000, 300)] = np.nan
    codes = rng.integers(0, 37, 5000)
    means, counts = grouped_means(values, codes, 37)
    for g in range(37):
        sel = values[(codes == g) & ~np.isnan(values)]
        if len(sel) == 0:
            assert np.isnan(means[g]) and counts[g] == 0
        else:
            assert means[g] == pytest.approx(sum(sel.tolist()) / len(sel), abs=1e-12)
            assert counts[g] == len(sel)


def test_fsum_mean_exact():
    vals = np.array([1e16, 1.0, -1e16, 1.0])
    assert fsum_mean(vals) == 0.5
