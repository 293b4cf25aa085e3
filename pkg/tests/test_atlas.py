from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from phonostyle.atlas import (
    MeterProfile,
    PoetProfile,
    meter_profiles,
    pca_project,
    poet_profiles,
    profiles_frame,
)
from phonostyle.errors import DesignError
from phonostyle.metrics import METRIC_NAMES

from conftest import synth_metric_frame


def _metric_frame(rng, n=2000, n_poets=6):
    poets = [f"p{i:02d}" for i in range(n_poets)]
    return synth_metric_frame(
        rng,
        n,
        poets,
        ["M01", "M02"],
        ["f1", "f2"],
        poet_effects={p: float(rng.normal(0, 0.4)) for p in poets},
        noise=0.1,
    )


def _profile(poet, values):
    full = {m: values.get(m) for m in METRIC_NAMES}
    return PoetProfile(poet_id=poet, raw=dict(full), normalized=dict(full), n_mesras=10, n_poems=2)


# ------------------------------------------------------------- poet profiles


def test_minmax_endpoints():
    df = pd.DataFrame(
        {
            "poet_id": ["a"] * 4 + ["b"] * 4,
            "poem_id": ["p1"] * 4 + ["p2"] * 4,
            "line_index": range(8),
            "meter": "M01",
            "form": "f1",
            "hardness": [1.0] * 4 + [2.0] * 4,
            "sonority": [3.0] * 8,
            "sibilance": [0.2] * 8,
            "vowel_ratio": [0.4] * 8,
            "cluster_ratio": [0.3] * 8,
            "entropy": [3.0] * 8,
            "n_symbols": [20] * 8,
            "n_tokens": [5] * 8,
        }
    )
    profiles = poet_profiles(df)
    by_id = {p.poet_id: p for p in profiles}
    assert by_id["a"].normalized["hardness"] == 0.0
    assert by_id["b"].normalized["hardness"] == 1.0
    # constant metric across poets: declared 0.5 tie value
    assert by_id["a"].normalized["sonority"] == 0.5
    assert by_id["b"].normalized["sonority"] == 0.5


def test_single_poet_is_an_error():
    rng = np.random.default_rng(0)
    df = _metric_frame(rng)
    solo = df[df["poet_id"] == "p00"]
    with pytest.raises(DesignError, match="2 poets"):
        poet_profiles(solo)


def test_raw_means_match_two_pass_oracle():
    rng = np.random.default_rng(1)
    df = _metric_frame(rng, n=3000)
    df.loc[df.index[:100], "sibilance"] = np.nan
    profiles = poet_profiles(df)
    for p in profiles:
        sub = df[df["poet_id"] == p.poet_id]
        for m in METRIC_NAMES:
            vals = sub[m].dropna().tolist()
            if not vals:
                assert p.raw[m] is None
            else:
                assert p.raw[m] == pytest.approx(sum(vals) / len(vals), abs=1e-12)
        assert p.n_mesras == len(sub)


def test_normalization_is_monotone():
    rng = np.random.default_rng(2)
    df = _metric_frame(rng)
    profiles = poet_profiles(df)
    raws = [p.raw["hardness"] for p in profiles]
    norms = [p.normalized["hardness"] for p in profiles]
    assert np.argsort(raws).tolist() == np.argsort(norms).tolist()


def test_poet_with_no_defined_sibilance_gets_none():
    rng = np.random.default_rng(3)
    df = _metric_frame(rng)
    df.loc[df["poet_id"] == "p01", "sibilance"] = np.nan
    profiles = {p.poet_id: p for p in poet_profiles(df)}
    assert profiles["p01"].raw["sibilance"] is None
    assert profiles["p01"].normalized["sibilance"] is None
    assert profiles_frame(list(profiles.values()))["sibilance_raw"].isna().sum() == 1


# ------------------------------------------------------------ meter profiles


def test_meter_profile_single_poem_identity():
    df = pd.DataFrame(
        {
            "poet_id": ["a", "a"],
            "poem_id": ["p1", "p1"],
            "line_index": [0, 1],
            "meter": ["M01", "M01"],
            "form": ["f1", "f1"],
            "hardness": [1.6, 1.6],
            "sonority": [3.2, 3.2],
            "sibilance": [0.18, 0.18],
            "vowel_ratio": [0.4, 0.4],
            "cluster_ratio": [0.3, 0.3],
            "entropy": [3.7, 3.7],
            "n_symbols": [20, 22],
            "n_tokens": [5, 6],
        }
    )
    prof = meter_profiles(df)[0]
    assert isinstance(prof, MeterProfile)
    assert prof.n_poems == 1 and prof.n_mesras == 2
    assert prof.poem_level_means["hardness"] == pytest.approx(1.6)


def test_meter_profile_poem_level_weighting():
    rng = np.random.default_rng(4)
    df = _metric_frame(rng, n=1200)
    base = {p.meter: p for p in meter_profiles(df)}
    # repeating one poem's rows verbatim does not change the meter mean
    first = df.iloc[0]
    poem = df[
        (df["poet_id"] == first["poet_id"])
        & (df["poem_id"] == first["poem_id"])
        & (df["meter"] == first["meter"])
    ]
    dup = pd.concat([df, poem.assign(line_index=poem["line_index"] + 100_000)])
    again = {p.meter: p for p in meter_profiles(dup)}
    for meter, prof in base.items():
        for m, v in prof.poem_level_means.items():
            assert again[meter].poem_level_means[m] == pytest.approx(v, abs=1e-12)
    assert again[first["meter"]].n_mesras == base[first["meter"]].n_mesras + len(poem)


# ----------------------------------------------------------------- PCA


def charpoly_eigenvalues(C: np.ndarray) -> np.ndarray:
    """Faddeev-LeVerrier characteristic polynomial, then polynomial roots."""
    n = C.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(C)
    for k in range(1, n + 1):
        M = C @ M + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(C @ M) / k)
    roots = np.roots(coeffs)
    return np.sort(roots.real)[::-1]


def test_pca_rank_one_data():
    profiles = [
        _profile(f"poet{i}", {m: (float(i) if m == "hardness" else 1.0) for m in METRIC_NAMES})
        for i in range(5)
    ]
    proj = pca_project(profiles)
    assert proj.metric_names == ["hardness"]
    assert proj.explained_variance_ratio[0] == pytest.approx(1.0)
    assert set(proj.dropped_metrics) == set(METRIC_NAMES) - {"hardness"}


def test_pca_orthonormal_and_reconstruction():
    rng = np.random.default_rng(5)
    profiles = [
        _profile(f"poet{i:02d}", {m: float(rng.normal()) for m in METRIC_NAMES}) for i in range(24)
    ]
    proj = pca_project(profiles)
    L = proj.loadings
    np.testing.assert_allclose(L.T @ L, np.eye(L.shape[1]), atol=1e-10)
    # coordinates reproduce the standardized data when all components kept
    X = np.array([[p.raw[m] for m in METRIC_NAMES] for p in sorted(profiles, key=lambda p: p.poet_id)])
    Z = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    np.testing.assert_allclose(proj.coordinates @ L.T, Z, atol=1e-8)


def test_pca_eigenvalues_match_charpoly_oracle():
    rng = np.random.default_rng(6)
    for _ in range(20):
        profiles = [
            _profile(f"poet{i:02d}", {m: float(rng.normal()) for m in METRIC_NAMES})
            for i in range(15)
        ]
        proj = pca_project(profiles)
        X = np.array([[p.raw[m] for m in METRIC_NAMES] for p in sorted(profiles, key=lambda p: p.poet_id)])
        Z = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
        C = (Z.T @ Z) / (len(profiles) - 1)
        total = np.trace(C)
        eig_from_ratio = proj.explained_variance_ratio * total
        np.testing.assert_allclose(eig_from_ratio, charpoly_eigenvalues(C), atol=1e-10)


def test_pca_ratios_nonincreasing_and_sum_to_one():
    rng = np.random.default_rng(7)
    profiles = [
        _profile(f"poet{i:02d}", {m: float(rng.normal()) for m in METRIC_NAMES}) for i in range(12)
    ]
    proj = pca_project(profiles)
    r = proj.explained_variance_ratio
    assert all(r[i] >= r[i + 1] - 1e-12 for i in range(len(r) - 1))
    assert r.sum() == pytest.approx(1.0, abs=1e-10)


def test_pca_rotation_invariant_eigenvalues():
    rng = np.random.default_rng(8)
    profiles = [
        _profile(f"poet{i:02d}", {m: float(rng.normal()) for m in METRIC_NAMES}) for i in range(20)
    ]
    proj = pca_project(profiles)
    X = np.array([[p.raw[m] for m in METRIC_NAMES] for p in sorted(profiles, key=lambda p: p.poet_id)])
    Z = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    # rotate standardized data by a random orthogonal matrix
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    eig_a = np.sort(np.linalg.eigvalsh((Z.T @ Z) / (len(Z) - 1)))
    ZQ = Z @ Q
    eig_b = np.sort(np.linalg.eigvalsh((ZQ.T @ ZQ) / (len(Z) - 1)))
    np.testing.assert_allclose(eig_a, eig_b, atol=1e-10)


def test_pca_dominant_pair_drives_pc1():
    rng = np.random.default_rng(9)
    profiles = []
    for i in range(40):
        u = rng.normal()
        v = rng.normal()
        vals = {
            "vowel_ratio": u + 0.10 * rng.normal(),
            "sonority": u + 0.10 * rng.normal(),
            "hardness": v + 0.8 * rng.normal(),
            "sibilance": 0.6 * v + 0.8 * rng.normal(),
            "entropy": rng.normal(),
            "cluster_ratio": -0.3 * u + 0.9 * rng.normal(),
        }
        profiles.append(_profile(f"poet{i:02d}", vals))
    proj = pca_project(profiles)
    pc1 = np.abs(proj.loadings[:, 0])
    top_two = {proj.metric_names[i] for i in np.argsort(pc1)[::-1][:2]}
    assert top_two == {"vowel_ratio", "sonority"}


def test_pca_sign_convention_dominant_loading_positive():
    rng = np.random.default_rng(10)
    profiles = [
        _profile(f"poet{i:02d}", {m: float(rng.normal()) for m in METRIC_NAMES}) for i in range(18)
    ]
    proj = pca_project(profiles)
    for j in range(proj.loadings.shape[1]):
        col = proj.loadings[:, j]
        assert col[int(np.argmax(np.abs(col)))] > 0


def test_pca_excludes_incomplete_poets_and_needs_three():
    rng = np.random.default_rng(11)
    good = [_profile(f"poet{i}", {m: float(rng.normal()) for m in METRIC_NAMES}) for i in range(3)]
    bad = _profile("broken", {m: (None if m == "sibilance" else 1.0) for m in METRIC_NAMES})
    proj = pca_project(good + [bad])
    assert proj.excluded_poets == ["broken"]
    with pytest.raises(DesignError, match="3 poets"):
        pca_project(good[:2] + [bad])


def test_pca_all_constant_metrics_is_error():
    profiles = [_profile(f"poet{i}", {m: 1.0 for m in METRIC_NAMES}) for i in range(5)]
    with pytest.raises(DesignError, match="constant"):
        pca_project(profiles)
