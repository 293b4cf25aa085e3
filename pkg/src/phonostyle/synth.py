"""Synthetic corpus generation for tests, demos and benchmarks.

Streams are drawn from two symbol pools of the default feature table: a
"soft" pool (vowels, liquids, nasals, glides) and a "hard" pool (stops
and obstruents). Each mesra mixes the pools with probability theta, and
theta is a linear stack of poet, meter and form offsets, so expected
hardness (and sonority, inversely) is linear in the planted effects:
recovering their sign and ordering is a well-posed target for the
controlled model.

The confounded preset assigns soft poets mostly to hard meters so that
naive poet means invert the true ordering while the controlled fit can
still identify it from the off-diagonal cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

SOFT_POOL = ("a", "A", "e", "i", "o", "u", "l", "r", "m", "n", "y", "w")
HARD_POOL = ("k", "q", "t", "g", "x", "b", "d", "p", "s", "S", "C", "j", "z", "f", "v", "h")

_WORD_BREAK_P = 0.22


@dataclass
class SynthSpec:
    """Planted-effect corpus layout.

    ``poet_theta`` etc. are offsets on the hard-pool mixing probability;
    ``meter_shares[poet]`` gives that poet's distribution over meters
    (uniform when absent).
    """

    poets: list[str]
    meters: list[str]
    forms: list[str]
    poet_theta: dict[str, float]
    meter_theta: dict[str, float]
    form_theta: dict[str, float] = field(default_factory=dict)
    meter_shares: dict[str, list[float]] | None = None
    base_theta: float = 0.45
    mesras_per_poet: int = 2500
    mesras_per_poem: int = 10
    length_range: tuple[int, int] = (18, 42)
    centuries: dict[str, int] | None = None
    seed: int = 42


def demo_spec(seed: int = 42, mesras_per_poet: int = 1200) -> SynthSpec:
    """Small five-meter corpus exercising the whole pipeline."""
    poets = [f"poet{i:02d}" for i in range(1, 9)]
    meters = ["M01", "M02", "M03", "M04", "M05"]
    rng = np.random.default_rng(seed)
    return SynthSpec(
        poets=poets,
        meters=meters,
        forms=["ghazal", "masnavi", "qasida"],
        poet_theta={p: t for p, t in zip(poets, np.linspace(-0.10, 0.10, len(poets)))},
        meter_theta={"M01": 0.12, "M02": -0.06, "M03": -0.02, "M04": -0.08, "M05": 0.04},
        form_theta={"ghazal": -0.03, "masnavi": 0.03, "qasida": 0.0},
        meter_shares={p: rng.dirichlet(np.full(len(meters), 8.0)).tolist() for p in poets},
        mesras_per_poet=mesras_per_poet,
        centuries={p: 10 + (i % 10) for i, p in enumerate(poets)},
        seed=seed,
    )


def confounded_spec(seed: int, mesras_per_poet: int = 2500) -> SynthSpec:
    """Soft poets write mostly in the hard meter: naive means invert.

    True poet ordering (soft to hard): p1 < p2 < p3 < p4. Their shares in
    the hard meter fall with hardness, so pooled means order the other
    way around.
    """
    poets = ["p1", "p2", "p3", "p4"]
    deltas = [-0.09, -0.03, 0.03, 0.09]
    hard_shares = [0.9, 0.6, 0.4, 0.1]
    return SynthSpec(
        poets=poets,
        meters=["M01", "M02"],  # M01 is the hard meter
        forms=["ghazal", "masnavi"],
        poet_theta=dict(zip(poets, deltas)),
        meter_theta={"M01": 0.25, "M02": -0.25},
        form_theta={"ghazal": -0.02, "masnavi": 0.02},
        meter_shares={p: [s, 1.0 - s] for p, s in zip(poets, hard_shares)},
        mesras_per_poet=mesras_per_poet,
        centuries={p: 11 + i for i, p in enumerate(poets)},
        seed=seed,
    )


def generate_corpus(spec: SynthSpec) -> pd.DataFrame:
    """One row per mesra with pre-phonemized line text.

    Columns mirror the ingest schema (poet_name, poem_id, century,
    meter_code, form, line_text, line_index). Poems are homogeneous in
    poet, meter and form.
    """
    rng = np.random.default_rng(spec.seed)
    per_poem = spec.mesras_per_poem
    rows_poet: list[str] = []
    rows_meter: list[str] = []
    rows_form: list[str] = []
    rows_poem: list[str] = []
    rows_index: list[int] = []

    for poet in spec.poets:
        n_poems = max(1, spec.mesras_per_poet // per_poem)
        shares = (
            np.asarray(spec.meter_shares[poet], dtype=np.float64)
            if spec.meter_shares is not None
            else np.full(len(spec.meters), 1.0 / len(spec.meters))
        )
        # realize the planted shares exactly (largest-remainder quota), so
        # planted confounds survive sampling noise; order stays random
        quota = shares / shares.sum() * n_poems
        counts = np.floor(quota).astype(int)
        spill = np.argsort(-(quota - counts))
        counts[spill[: n_poems - counts.sum()]] += 1
        poem_meters = np.repeat(np.arange(len(spec.meters)), counts)
        rng.shuffle(poem_meters)
        poem_forms = rng.integers(0, len(spec.forms), size=n_poems)
        for k in range(n_poems):
            meter = spec.meters[int(poem_meters[k])]
            form = spec.forms[int(poem_forms[k])]
            poem_id = f"{poet}-poem-{k:05d}"
            for j in range(per_poem):
                rows_poet.append(poet)
                rows_meter.append(meter)
                rows_form.append(form)
                rows_poem.append(poem_id)
                rows_index.append(j)

    n = len(rows_poet)
    theta = np.full(n, spec.base_theta)
    theta += np.array([spec.poet_theta.get(p, 0.0) for p in rows_poet])
    theta += np.array([spec.meter_theta.get(m, 0.0) for m in rows_meter])
    theta += np.array([spec.form_theta.get(f, 0.0) for f in rows_form])
    theta = np.clip(theta, 0.05, 0.95)

    lo, hi = spec.length_range
    lengths = rng.integers(lo, hi + 1, size=n)
    texts = _assemble_streams(rng, theta, lengths)

    centuries = spec.centuries or {}
    return pd.DataFrame(
        {
            "poet_name": rows_poet,
            "poem_id": rows_poem,
            "century": [centuries.get(p) for p in rows_poet],
            "meter_code": rows_meter,
            "form": rows_form,
            "line_text": texts,
            "line_index": rows_index,
        }
    )


def _assemble_streams(rng: np.random.Generator, theta: np.ndarray, lengths: np.ndarray) -> list[str]:
    """Draw per-symbol pools and weave in word boundaries, vectorized."""
    total = int(lengths.sum())
    offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    hard = rng.random(total) < np.repeat(theta, lengths)
    soft_idx = rng.integers(0, len(SOFT_POOL), size=total)
    hard_idx = rng.integers(0, len(HARD_POOL), size=total)
    syms = np.where(hard, np.array(HARD_POOL)[hard_idx], np.array(SOFT_POOL)[soft_idx])
    breaks = rng.random(total) < _WORD_BREAK_P
    pieces = np.char.add(syms, np.where(breaks, " #", ""))
    plist = pieces.tolist()
    out = []
    for i in range(len(lengths)):
        out.append(" ".join(plist[offsets[i] : offsets[i + 1]]))
    return out


def write_corpus_files(df: pd.DataFrame, spec: SynthSpec, out_dir: str | Path) -> dict[str, Path]:
    """Write the corpus table plus alias/meter/century mapping files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out / "corpus.tsv",
        "aliases": out / "aliases.tsv",
        "meters": out / "meters.tsv",
        "centuries": out / "centuries.tsv",
    }
    df.to_csv(paths["corpus"], sep="\t", index=False)
    with open(paths["aliases"], "w", encoding="utf-8") as f:
        for p in spec.poets:
            f.write(f"{p}\t{p}\n")
    with open(paths["meters"], "w", encoding="utf-8") as f:
        for m in spec.meters:
            f.write(f"{m}\t{m}\n")
    with open(paths["centuries"], "w", encoding="utf-8") as f:
        for p in spec.poets:
            c = (spec.centuries or {}).get(p)
            if c is not None:
                f.write(f"{p}\t{c}\n")
    return paths
