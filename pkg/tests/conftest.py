from __future__ import annotations

import numpy as np
import pytest

from phonostyle.phonology import default_feature_table, default_rule_table


@pytest.fixture(scope="session")
def table():
    return default_feature_table()


@pytest.fixture(scope="session")
def rules():
    return default_rule_table()


def random_stream_text(rng: np.random.Generator, symbols: list[str], max_len: int = 80, boundary_p: float = 0.18) -> str:
    """Whitespace-joined pre-phonemized stream with optional boundaries."""
    n = int(rng.integers(1, max_len + 1))
    toks = []
    for i in range(n):
        toks.append(symbols[int(rng.integers(0, len(symbols)))])
        if i < n - 1 and rng.random() < boundary_p:
            toks.append("#")
    return " ".join(toks)


def synth_metric_frame(
    rng: np.random.Generator,
    n: int,
    poets: list[str],
    meters: list[str],
    forms: list[str],
    poet_effects: dict[str, float] | None = None,
    meter_effects: dict[str, float] | None = None,
    form_effects: dict[str, float] | None = None,
    noise: float = 0.1,
    intercept: float = 2.0,
    length_slopes: tuple[float, float] = (0.0, 0.0),
    mesras_per_poem: int = 5,
):
    """Metric-table-shaped frame with a planted linear hardness model."""
    import pandas as pd

    poet = rng.choice(poets, n)
    meter = rng.choice(meters, n)
    form = rng.choice(forms, n)
    n_symbols = rng.integers(15, 45, n)
    n_tokens = rng.integers(4, 10, n)
    poem_ordinal = rng.integers(0, max(1, n // (len(poets) * mesras_per_poem)), n)
    y = np.full(n, intercept)
    for name, eff in (poet_effects or {}).items():
        y += np.where(poet == name, eff, 0.0)
    for name, eff in (meter_effects or {}).items():
        y += np.where(meter == name, eff, 0.0)
    for name, eff in (form_effects or {}).items():
        y += np.where(form == name, eff, 0.0)
    y += length_slopes[0] * n_symbols + length_slopes[1] * n_tokens
    y += rng.normal(0.0, noise, n)
    return pd.DataFrame(
        {
            "poet_id": poet,
            "poem_id": [f"pm{v:05d}" for v in poem_ordinal],
            "line_index": np.arange(n),
            "meter": meter,
            "form": form,
            "century": rng.integers(10, 15, n),
            "hardness": y,
            "sonority": intercept - 0.3 * (y - intercept) + rng.normal(0, noise, n),
            "sibilance": np.clip(rng.normal(0.2, 0.05, n), 0, 1),
            "vowel_ratio": np.clip(rng.normal(0.4, 0.05, n), 0, 1),
            "cluster_ratio": np.clip(rng.normal(0.3, 0.05, n), 0, 1),
            "entropy": np.clip(rng.normal(3.5, 0.2, n), 0, None),
            "n_symbols": n_symbols,
            "n_tokens": n_tokens,
        }
    )
