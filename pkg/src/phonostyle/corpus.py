"""Corpus ingestion: normalization, identity control, cohort filtering.

Input is one or more UTF-8 delimited tables (default tab) with a header
naming the raw-row fields. Rows carry either one mesra each (explicit
``line_index``) or one poem each (``line_index`` empty; the text is split
on the configured structural delimiters). Poet names, meter labels and
centuries are canonicalized through small ``raw<TAB>canonical`` mapping
files so author identities and meters do not fragment.

Cohort construction is a three-stage filter with a written attrition
ledger: all extracted mesras; rows with usable meter/form metadata inside
the retained meters; and poet-meter cells meeting the support threshold.
"""

from __future__ import annotations

import hashlib
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import pandas as pd

from .errors import ConfigError, EmptyCohortError, MissingInputError, SchemaError

log = logging.getLogger(__name__)

OTHER_METER = "OTHER"
UNKNOWN_FORM = "UNKNOWN"

#: Display names for the canonical meter keys used by the default cohort.
METER_DISPLAY = {
    "M01": "mutaqarib",
    "M02": "hazaj",
    "M03": "ramal",
    "M04": "mujtass",
    "M05": "muzari'",
}
DEFAULT_RETAINED_METERS = frozenset(METER_DISPLAY)

# ya (U+064A -> U+06CC), kaf (U+0643 -> U+06A9), tatweel (U+0640) removed.
_CHAR_CANON = {0x064A: 0x06CC, 0x0643: 0x06A9, 0x0640: None}
_WS_RE = re.compile(r"\s+")


def normalize_text(raw: str) -> str:
    """Canonicalize orthography inside one line.

    Arabic ya/kaf become their Persian forms, tatweel is removed,
    whitespace runs collapse to a single space, and the result is
    stripped. Zero-width non-joiners are not whitespace and survive.
    Idempotent; introduces no characters beyond the canonical
    replacements and the plain space.
    """
    text = raw.translate(_CHAR_CANON)
    text = _WS_RE.sub(" ", text)
    return text.strip()


def slugify(name: str) -> str:
    """Deterministic fallback key for names missing from the alias table."""
    return _WS_RE.sub("_", normalize_text(name).casefold())


def _read_kv_file(path: str | Path, what: str) -> dict[str, str]:
    """Read a two-column ``raw<TAB>canonical`` mapping file."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"{what} file not found: {path}")
    mapping: dict[str, str] = {}
    for lineno, ln in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not ln.strip():
            continue
        if "\t" not in ln:
            raise SchemaError(f"{path}:{lineno}: expected raw<TAB>canonical, got {ln!r}")
        raw, _, canonical = ln.partition("\t")
        raw, canonical = raw.strip(), canonical.strip()
        if raw in mapping and mapping[raw] != canonical:
            raise ConfigError(
                f"{path}:{lineno}: {what} maps {raw!r} to both {mapping[raw]!r} and {canonical!r}"
            )
        mapping[raw] = canonical
    return mapping


class AliasTable:
    """Poet-name canonicalization with an explicit unlisted fallback."""

    def __init__(self, mapping: dict[str, str]):
        # keys are matched on normalized form
        self.mapping = {normalize_text(k): v for k, v in mapping.items()}
        self.unlisted: set[str] = set()

    @classmethod
    def load(cls, path: str | Path) -> "AliasTable":
        return cls(_read_kv_file(path, "alias table"))


def canonicalize_poet(name: str, aliases: AliasTable) -> tuple[str, bool]:
    """Return ``(canonical_key, unlisted)`` for a raw poet name.

    Names absent from the table map to a slug of their normalized form
    and are flagged unlisted (and remembered on the table for
    diagnostics).
    """
    key = aliases.mapping.get(normalize_text(name))
    if key is not None:
        return key, False
    slug = slugify(name)
    aliases.unlisted.add(slug)
    return slug, True


class MeterMap:
    """Raw meter labels to canonical keys; unmapped labels become OTHER."""

    def __init__(self, mapping: dict[str, str]):
        self.mapping = {normalize_text(k): v for k, v in mapping.items()}

    @classmethod
    def load(cls, path: str | Path) -> "MeterMap":
        return cls(_read_kv_file(path, "meter map"))

    def canonical(self, raw: str | None) -> str:
        if raw is None or not raw.strip():
            return OTHER_METER
        return self.mapping.get(normalize_text(raw), OTHER_METER)


def load_century_map(path: str | Path) -> dict[str, int]:
    """poet_id -> CE century number."""
    out: dict[str, int] = {}
    for k, v in _read_kv_file(path, "century map").items():
        try:
            out[k] = int(v)
        except ValueError as exc:
            raise SchemaError(f"century map: non-integer century {v!r} for {k!r}") from exc
    return out


def split_mesras(poem_text: str, delimiters: tuple[str, ...] = ("\t",)) -> list[str]:
    """Split a poem body on explicit structural delimiters only.

    Fragments are stripped and empty ones dropped; order is preserved.
    Raises SchemaError when nothing survives.
    """
    if not delimiters:
        raise ConfigError("empty mesra delimiter set")
    pattern = "|".join(re.escape(d) for d in sorted(delimiters, key=len, reverse=True))
    fragments = [f.strip() for f in re.split(pattern, poem_text)]
    fragments = [f for f in fragments if f]
    if not fragments:
        raise SchemaError(f"poem yields zero non-empty fragments: {poem_text!r}")
    return fragments


@dataclass(slots=True)
class RawRow:
    """One input row before canonicalization."""

    poet_name: str
    poem_id: str
    century: int | None
    meter_code: str | None
    form: str | None
    line_text: str
    line_index: int | None
    source: str = ""


@dataclass(slots=True)
class MesraRecord:
    """One hemistich after normalization and identity control."""

    mesra_id: str
    poet_id: str
    poem_id: str
    century: int | None
    meter: str
    form: str
    line_index: int
    text_norm: str
    symbols: tuple[str, ...] | None = None
    n_symbols: int | None = None
    n_tokens: int | None = None


@dataclass(frozen=True)
class CohortSpec:
    retained_meters: frozenset[str] = DEFAULT_RETAINED_METERS
    min_cell_mesras: int = 2000
    require_form: bool = True
    require_meter: bool = True

    def __post_init__(self) -> None:
        if self.min_cell_mesras < 1:
            raise ConfigError("min_cell_mesras must be >= 1")
        if not self.retained_meters:
            raise ConfigError("retained_meters must be non-empty")


@dataclass
class AttritionReport:
    """Counts at every filtering stage, written to disk on every run."""

    stage1_total: int
    usable_metadata_total: int
    stage2_retained_total: int
    stage3_final_total: int
    per_meter_stage2: dict[str, dict[str, float]]
    per_meter_stage3: dict[str, dict[str, float]]
    dropped_cells: list[dict[str, object]]
    n_poets: int
    n_poems: int
    min_cell_mesras: int

    @property
    def retained_share_of_usable(self) -> float:
        if self.usable_metadata_total == 0:
            return 0.0
        return self.stage2_retained_total / self.usable_metadata_total

    def to_dict(self) -> dict:
        d = asdict(self)
        d["retained_share_of_usable"] = self.retained_share_of_usable
        return d


def mesra_id_for(poet_id: str, poem_id: str, line_index: int) -> str:
    key = f"{poet_id}\x1f{poem_id}\x1f{line_index}".encode("utf-8")
    return hashlib.sha256(key).hexdigest()[:16]


@dataclass
class IngestDiagnostics:
    bad_encoding: int = 0
    empty_text: int = 0
    zero_fragment_poems: int = 0
    duplicates: int = 0
    unlisted_poets: set[str] = field(default_factory=set)

    def to_dict(self) -> dict:
        return {
            "bad_encoding": self.bad_encoding,
            "empty_text": self.empty_text,
            "zero_fragment_poems": self.zero_fragment_poems,
            "duplicates": self.duplicates,
            "unlisted_poets": sorted(self.unlisted_poets),
        }


_REQUIRED_COLUMNS = ("poet_name", "line_text")
_KNOWN_COLUMNS = ("poet_name", "poem_id", "century", "meter_code", "form", "line_text", "line_index")


def read_corpus_file(
    path: str | Path,
    delimiter: str = "\t",
    diagnostics: IngestDiagnostics | None = None,
) -> list[RawRow]:
    """Read one delimited corpus file into raw rows.

    Rows that fail UTF-8 decoding or have empty text are rejected with a
    diagnostic, never silently coerced.
    """
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"corpus file not found: {path}")
    diagnostics = diagnostics if diagnostics is not None else IngestDiagnostics()
    raw_lines = path.read_bytes().splitlines()
    if not raw_lines:
        raise SchemaError(f"{path}: empty corpus file")
    try:
        header = raw_lines[0].decode("utf-8").rstrip("\n").split(delimiter)
    except UnicodeDecodeError as exc:
        raise SchemaError(f"{path}: header is not valid UTF-8: {exc}") from exc
    header = [h.strip().lstrip("﻿") for h in header]
    for col in _REQUIRED_COLUMNS:
        if col not in header:
            raise SchemaError(f"{path}: missing required column {col!r} (header: {header})")
    idx = {col: header.index(col) for col in header if col in _KNOWN_COLUMNS}

    rows: list[RawRow] = []
    poem_counters: dict[str, int] = {}
    for lineno, raw in enumerate(raw_lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            line = raw.decode("utf-8")
        except UnicodeDecodeError:
            diagnostics.bad_encoding += 1
            log.warning("%s:%d: invalid UTF-8, row rejected", path, lineno)
            continue
        fields = line.split(delimiter)

        def get(col: str) -> str:
            i = idx.get(col)
            if i is None or i >= len(fields):
                return ""
            return fields[i].strip()

        text = get("line_text")
        if not text.strip():
            diagnostics.empty_text += 1
            continue
        poem_id = get("poem_id")
        if not poem_id:
            # synthesize from (poet, source file, poem ordinal)
            poet_slug = slugify(get("poet_name"))
            n = poem_counters.get(poet_slug, 0)
            poem_counters[poet_slug] = n + 1
            poem_id = f"{poet_slug}-{path.stem}-{n:06d}"
        century = get("century")
        line_index = get("line_index")
        rows.append(
            RawRow(
                poet_name=get("poet_name"),
                poem_id=poem_id,
                century=int(century) if century else None,
                meter_code=get("meter_code") or None,
                form=get("form") or None,
                line_text=text,
                line_index=int(line_index) if line_index else None,
                source=str(path),
            )
        )
    return rows


def rows_to_records(
    rows: list[RawRow],
    aliases: AliasTable,
    meters: MeterMap,
    centuries: dict[str, int] | None = None,
    mesra_delimiters: tuple[str, ...] = ("\t",),
    diagnostics: IngestDiagnostics | None = None,
) -> list[MesraRecord]:
    """Canonicalize raw rows into deduplicated, deterministically sorted records.

    Poem rows (no explicit line_index) pass through split_mesras and get
    sequential indices per poem. Duplicate (poet, poem, line_index) keys
    keep the first occurrence. The output order is independent of input
    order: records are sorted by (poet_id, poem_id, line_index).
    """
    diagnostics = diagnostics if diagnostics is not None else IngestDiagnostics()
    records: dict[tuple[str, str, int], MesraRecord] = {}
    next_index: dict[tuple[str, str], int] = {}
    for row in rows:
        poet_id, unlisted = canonicalize_poet(row.poet_name, aliases)
        if unlisted:
            diagnostics.unlisted_poets.add(poet_id)
        meter = meters.canonical(row.meter_code)
        form = normalize_text(row.form).casefold() if row.form else UNKNOWN_FORM
        if centuries is not None:
            century = centuries.get(poet_id)
        else:
            century = row.century
        if row.line_index is not None:
            pieces = [(row.line_index, normalize_text(row.line_text))]
        else:
            try:
                fragments = split_mesras(row.line_text, mesra_delimiters)
            except SchemaError:
                diagnostics.zero_fragment_poems += 1
                continue
            start = next_index.get((poet_id, row.poem_id), 0)
            pieces = [(start + k, normalize_text(f)) for k, f in enumerate(fragments)]
            next_index[(poet_id, row.poem_id)] = start + len(fragments)
        for line_index, text_norm in pieces:
            if not text_norm:
                diagnostics.empty_text += 1
                continue
            key = (poet_id, row.poem_id, line_index)
            if key in records:
                diagnostics.duplicates += 1
                log.info("duplicate mesra %s kept-first", key)
                continue
            records[key] = MesraRecord(
                mesra_id=mesra_id_for(*key),
                poet_id=poet_id,
                poem_id=row.poem_id,
                century=century,
                meter=meter,
                form=form,
                line_index=line_index,
                text_norm=text_norm,
            )
    return [records[k] for k in sorted(records)]


def ingest_corpus(
    paths: list[str | Path],
    aliases: AliasTable,
    meters: MeterMap,
    centuries: dict[str, int] | None = None,
    delimiter: str = "\t",
    mesra_delimiters: tuple[str, ...] = ("\t",),
    threads: int = 1,
    diagnostics: IngestDiagnostics | None = None,
) -> list[MesraRecord]:
    """Read many corpus files (optionally in parallel) into sorted records.

    The merge is single-threaded and the final sort makes the result
    independent of file order and scheduling.
    """
    diagnostics = diagnostics if diagnostics is not None else IngestDiagnostics()
    if threads > 1 and len(paths) > 1:
        per_file = [IngestDiagnostics() for _ in paths]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda job: read_corpus_file(job[0], delimiter, job[1]), zip(paths, per_file)))
        for d in per_file:
            diagnostics.bad_encoding += d.bad_encoding
            diagnostics.empty_text += d.empty_text
            diagnostics.zero_fragment_poems += d.zero_fragment_poems
            diagnostics.duplicates += d.duplicates
            diagnostics.unlisted_poets |= d.unlisted_poets
    else:
        chunks = [read_corpus_file(p, delimiter, diagnostics) for p in paths]
    rows = [r for chunk in chunks for r in chunk]
    return rows_to_records(rows, aliases, meters, centuries, mesra_delimiters, diagnostics)


def _meter_breakdown(counts: dict[str, int], denominator: int) -> dict[str, dict[str, float]]:
    return {
        m: {"count": c, "share": (c / denominator if denominator else 0.0)}
        for m, c in sorted(counts.items())
    }


def build_cohort(records: list[MesraRecord], spec: CohortSpec) -> tuple[list[MesraRecord], AttritionReport]:
    """Three-stage filter with an explicit attrition ledger.

    Stage 1 counts everything; stage 2 keeps rows with usable meter/form
    metadata whose meter is retained; stage 3 drops poet-meter cells
    below the support threshold. Raises EmptyCohortError rather than
    returning an empty cohort.
    """
    stage1 = len(records)
    usable = []
    for r in records:
        if spec.require_meter and r.meter == OTHER_METER:
            continue
        if spec.require_form and r.form == UNKNOWN_FORM:
            continue
        usable.append(r)
    stage2 = [r for r in usable if r.meter in spec.retained_meters]

    cell_counts: dict[tuple[str, str], int] = {}
    for r in stage2:
        cell_counts[(r.poet_id, r.meter)] = cell_counts.get((r.poet_id, r.meter), 0) + 1
    kept_cells = {cell for cell, n in cell_counts.items() if n >= spec.min_cell_mesras}
    stage3 = [r for r in stage2 if (r.poet_id, r.meter) in kept_cells]

    if not stage3:
        raise EmptyCohortError(
            f"empty cohort: {stage1} records in, 0 out "
            f"(usable={len(usable)}, retained={len(stage2)}, min_cell={spec.min_cell_mesras})"
        )

    meter2: dict[str, int] = {}
    for r in stage2:
        meter2[r.meter] = meter2.get(r.meter, 0) + 1
    meter3: dict[str, int] = {}
    for r in stage3:
        meter3[r.meter] = meter3.get(r.meter, 0) + 1
    dropped = [
        {"poet_id": poet, "meter": meter, "count": cell_counts[(poet, meter)]}
        for (poet, meter) in sorted(cell_counts)
        if (poet, meter) not in kept_cells
    ]
    report = AttritionReport(
        stage1_total=stage1,
        usable_metadata_total=len(usable),
        stage2_retained_total=len(stage2),
        stage3_final_total=len(stage3),
        per_meter_stage2=_meter_breakdown(meter2, len(usable)),
        per_meter_stage3=_meter_breakdown(meter3, len(stage3)),
        dropped_cells=dropped,
        n_poets=len({r.poet_id for r in stage3}),
        n_poems=len({(r.poet_id, r.poem_id) for r in stage3}),
        min_cell_mesras=spec.min_cell_mesras,
    )
    # stage-3 output never contains a cell below threshold, by construction;
    # re-grouping here guards against future edits breaking the contract
    regroup: dict[tuple[str, str], int] = {}
    for r in stage3:
        regroup[(r.poet_id, r.meter)] = regroup.get((r.poet_id, r.meter), 0) + 1
    assert all(n >= spec.min_cell_mesras for n in regroup.values())
    return stage3, report


COHORT_COLUMNS = ["mesra_id", "poet_id", "poem_id", "century", "meter", "form", "line_index", "text_norm"]


def cohort_frame(records: list[MesraRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "mesra_id": [r.mesra_id for r in records],
            "poet_id": [r.poet_id for r in records],
            "poem_id": [r.poem_id for r in records],
            "century": pd.array([r.century for r in records], dtype="Int64"),
            "meter": [r.meter for r in records],
            "form": [r.form for r in records],
            "line_index": [r.line_index for r in records],
            "text_norm": [r.text_norm for r in records],
        }
    )


def write_cohort(records: list[MesraRecord], path: str | Path, delimiter: str = "\t") -> None:
    cohort_frame(records).to_csv(path, sep=delimiter, index=False)


def read_cohort(path: str | Path, delimiter: str = "\t") -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"cohort file not found: {path}")
    df = pd.read_csv(path, sep=delimiter, dtype={"poet_id": str, "poem_id": str, "meter": str, "form": str, "mesra_id": str, "text_norm": str}, keep_default_na=False, na_values=[""])
    missing = [c for c in COHORT_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: cohort file missing columns {missing}")
    return df
