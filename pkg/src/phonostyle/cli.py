"""Command-line pipeline: ingest, metrics, fit, bootstrap, project, report, synth.

Every subcommand validates its inputs up front (no partial outputs on a
missing file), writes its artifacts plus a run manifest into the output
directory, and exits with a documented code:

  0  success
  2  usage error (unknown flag, bad value)
  3  missing input file
  4  schema or configuration error
  5  data or model error (empty cohort, rank deficiency, ...)
  1  unexpected failure

Failures print one machine-readable line to stderr:
``phonostyle: error=<class> detail=<message>``.

A JSON config file (``--config`` or the PHONOSTYLE_CONFIG environment
variable) supplies defaults; explicit flags always win. All randomness
derives from a single 64-bit seed (default 42, never time-derived).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import pandas as pd

from . import __version__, atlas, corpus, metrics as metrics_mod, render, synth
from .errors import (
    ConfigError,
    MissingInputError,
    PhonostyleError,
    SchemaError,
)
from .manifest import ManifestWriter
from .phonology import ParseMode, UnknownPolicy, default_feature_table, load_feature_table, RuleTable, default_rule_table, encode_batch
from .stats import (
    ModelSpec,
    bootstrap_century,
    build_design,
    century_trend,
    effect_correlation,
    fit_ols_fe,
    nested_r2,
    within_meter_effects,
)

log = logging.getLogger("phonostyle")

DEFAULT_SEED = 42

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_SCHEMA = 4
EXIT_DATA = 5

_PRIMARY_OUTCOMES = ("hardness", "sonority", "sibilance")


def _json_dump(obj: object, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _require_inputs(*paths: str | Path | None) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise MissingInputError(f"input not found: {p}")


def _load_config(explicit: str | None) -> dict:
    path = explicit or os.environ.get("PHONOSTYLE_CONFIG")
    if not path:
        return {}
    if not Path(path).exists():
        raise MissingInputError(f"config file not found: {path}")
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return cfg


class _Settings:
    """Flag > per-subcommand config > global config > built-in default."""

    def __init__(self, args: argparse.Namespace, config: dict, subcommand: str):
        self.args = vars(args)
        self.config = config
        self.sub = config.get(subcommand, {}) if isinstance(config.get(subcommand), dict) else {}
        self.effective: dict = {"subcommand": subcommand}

    def get(self, key: str, default=None):
        value = self.args.get(key)
        if value is None:
            value = self.sub.get(key, self.config.get(key, default))
        self.effective[key] = value
        return value


def _read_metrics(path: str | Path) -> pd.DataFrame:
    _require_inputs(path)
    df = pd.read_csv(
        path,
        dtype={"mesra_id": str, "poet_id": str, "poem_id": str, "meter": str, "form": str},
        keep_default_na=False,
        na_values=[""],
    )
    needed = {"poet_id", "poem_id", "line_index", "meter", "form"} | set(metrics_mod.METRIC_NAMES)
    missing = sorted(needed - set(df.columns))
    if missing:
        raise SchemaError(f"{path}: metrics file missing columns {missing}")
    return df


# ---------------------------------------------------------------- subcommands


def cmd_ingest(args: argparse.Namespace, config: dict) -> int:
    s = _Settings(args, config, "ingest")
    corpus_paths = args.corpus
    aliases_path = s.get("aliases")
    meters_path = s.get("meters")
    centuries_path = s.get("centuries")
    min_cell = int(s.get("min_cell", 2000))
    out_dir = Path(s.get("out"))
    delimiter = s.get("delimiter", "\t")
    mesra_delims = tuple(s.get("mesra_delim") or ["\t"])
    retained = frozenset((s.get("retained_meters") or ",".join(sorted(corpus.DEFAULT_RETAINED_METERS))).split(","))
    require_form = not bool(s.get("no_require_form", False))
    require_meter = not bool(s.get("no_require_meter", False))
    threads = int(s.get("threads", 1))

    _require_inputs(*corpus_paths, aliases_path, meters_path, centuries_path)
    aliases = corpus.AliasTable.load(aliases_path)
    meter_map = corpus.MeterMap.load(meters_path)
    centuries = corpus.load_century_map(centuries_path) if centuries_path else None

    diag = corpus.IngestDiagnostics()
    records = corpus.ingest_corpus(
        [Path(p) for p in corpus_paths],
        aliases,
        meter_map,
        centuries,
        delimiter=delimiter,
        mesra_delimiters=mesra_delims,
        threads=threads,
        diagnostics=diag,
    )
    spec = corpus.CohortSpec(
        retained_meters=retained,
        min_cell_mesras=min_cell,
        require_form=require_form,
        require_meter=require_meter,
    )
    cohort, attrition = corpus.build_cohort(records, spec)

    manifest = ManifestWriter("ingest", s.effective, seed=None)
    for p in corpus_paths:
        manifest.add_input(p)
    manifest.add_input(aliases_path)
    manifest.add_input(meters_path)
    if centuries_path:
        manifest.add_input(centuries_path)

    out_dir.mkdir(parents=True, exist_ok=True)
    cohort_path = out_dir / "cohort.tsv"
    attrition_path = out_dir / "attrition.json"
    corpus.write_cohort(cohort, cohort_path)
    payload = attrition.to_dict()
    payload["diagnostics"] = diag.to_dict()
    _json_dump(payload, attrition_path)
    manifest.add_output(cohort_path)
    manifest.add_output(attrition_path)
    manifest.write(out_dir)
    log.info(
        "cohort: %d -> %d -> %d mesras, %d poets",
        attrition.stage1_total,
        attrition.stage2_retained_total,
        attrition.stage3_final_total,
        attrition.n_poets,
    )
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace, config: dict) -> int:
    s = _Settings(args, config, "metrics")
    cohort_path = s.get("cohort")
    features_path = s.get("features")
    rules_path = s.get("rules")
    out_path = Path(s.get("out"))
    mode = ParseMode(s.get("mode", ParseMode.PREPHONEMIZED.value))
    policy = UnknownPolicy(s.get("policy", UnknownPolicy.STRICT.value))

    _require_inputs(cohort_path, features_path, rules_path)
    table = load_feature_table(features_path) if features_path else default_feature_table()
    rules = RuleTable.load(rules_path) if rules_path else (default_rule_table() if mode is ParseMode.RULE_G2P else None)

    cohort = corpus.read_cohort(cohort_path)
    id_cols = ["mesra_id", "poet_id", "poem_id", "century", "meter", "form", "line_index"]
    chunk_size = 200_000  # bound transient memory on corpus-scale runs
    pieces = []
    n_rejects = 0
    first_reject: str | None = None
    n_unknown_dropped = 0
    for lo in range(0, len(cohort), chunk_size):
        part = cohort.iloc[lo : lo + chunk_size]
        batch = encode_batch(part["text_norm"].astype(str).tolist(), table, mode=mode, policy=policy, rules=rules)
        frame = metrics_mod.compute_metrics(batch, table)
        kept = part.loc[batch.kept, id_cols].reset_index(drop=True)
        pieces.append(pd.concat([kept, frame.reset_index(drop=True)], axis=1))
        n_rejects += len(batch.rejects)
        if batch.rejects and first_reject is None:
            first_reject = batch.rejects[0][1]
        n_unknown_dropped += batch.n_unknown_dropped
    out = pd.concat(pieces, ignore_index=True) if pieces else pd.DataFrame(columns=id_cols)

    manifest = ManifestWriter("metrics", s.effective, seed=None)
    manifest.add_input(cohort_path)
    if features_path:
        manifest.add_input(features_path)
    if rules_path:
        manifest.add_input(rules_path)

    out_path.parent.mkdir(parents=True, exist_ok=True)
    out.to_csv(out_path, index=False)
    manifest.add_output(out_path)
    manifest.write(out_path.parent)
    if n_rejects:
        log.warning("rejected %d mesras (first: %s)", n_rejects, first_reject)
    if n_unknown_dropped:
        log.warning("dropped %d unknown symbols under skip policy", n_unknown_dropped)
    log.info("metrics: %d rows in, %d rows out", len(cohort), len(out))
    return EXIT_OK


def _fit_outputs(args: argparse.Namespace, s: _Settings, df: pd.DataFrame) -> dict[str, object]:
    """Compute the requested fit artifacts keyed by output filename stem."""
    method = s.get("method", "auto")
    covariates = ("n_symbols", "n_tokens")
    outputs: dict[str, object] = {}
    if args.spec:
        _require_inputs(args.spec)
        spec = ModelSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
        fit = fit_ols_fe(build_design(df, spec), method=method)
        outputs["fit"] = fit.result.to_dict()
    if args.primary:
        for outcome in _PRIMARY_OUTCOMES:
            spec = ModelSpec(outcome=outcome, fixed_effects=("poet", "meter", "form"), covariates=covariates)
            fit = fit_ols_fe(build_design(df, spec), method=method)
            outputs[f"fit_{outcome}"] = fit.result.to_dict()
    if args.nested:
        outcome = s.get("outcome", "hardness")
        outputs["nested"] = {
            "outcome": outcome,
            "ladder": nested_r2(df, outcome=outcome, covariates=covariates, method=method),
        }
    if args.within_meter:
        min_cell = int(s.get("min_cell", 2000))
        meters = sorted(df["meter"].unique()) if args.within_meter == "all" else [args.within_meter]
        per_outcome: dict[str, dict[str, dict[str, float]]] = {o: {} for o in _PRIMARY_OUTCOMES}
        for meter in meters:
            cell: dict[str, dict[str, float]] = {}
            for outcome in _PRIMARY_OUTCOMES:
                effects = within_meter_effects(
                    df, meter, outcome, min_cell=min_cell, covariates=covariates, method=method
                )
                cell[outcome] = effects
                per_outcome[outcome][meter] = effects
            outputs[f"within_meter_{meter}"] = {"meter": meter, "min_cell": min_cell, "effects": cell}
        if len(meters) > 1:
            outputs["effect_correlations"] = {
                outcome: effect_correlation(per_outcome[outcome]) for outcome in _PRIMARY_OUTCOMES
            }
    if args.century_trend:
        outcomes = list(metrics_mod.METRIC_NAMES) if args.century_trend == "all" else [args.century_trend]
        for outcome in outcomes:
            fit = century_trend(df, outcome, covariates=covariates, method=method)
            outputs[f"century_trend_{outcome}"] = fit.result.to_dict()
    if not outputs:
        raise ConfigError("fit: nothing to do (pass --spec, --primary, --nested, --within-meter or --century-trend)")
    return outputs


def cmd_fit(args: argparse.Namespace, config: dict) -> int:
    s = _Settings(args, config, "fit")
    metrics_path = s.get("metrics")
    out_dir = Path(s.get("out"))
    df = _read_metrics(metrics_path)
    outputs = _fit_outputs(args, s, df)

    manifest = ManifestWriter("fit", s.effective, seed=None)
    manifest.add_input(metrics_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    for stem, payload in outputs.items():
        path = out_dir / f"{stem}.json"
        _json_dump(payload, path)
        manifest.add_output(path)
    manifest.write(out_dir)
    return EXIT_OK


def cmd_bootstrap(args: argparse.Namespace, config: dict) -> int:
    s = _Settings(args, config, "bootstrap")
    metrics_path = s.get("metrics")
    replicates = int(s.get("replicates", 1000))
    seed = int(s.get("seed", DEFAULT_SEED))
    min_poems = int(s.get("min_poems", 5))
    threads = int(s.get("threads", 1))
    out_dir = Path(s.get("out"))

    df = _read_metrics(metrics_path)
    trend = bootstrap_century(df, replicates=replicates, seed=seed, min_poems=min_poems, threads=threads)

    manifest = ManifestWriter("bootstrap", s.effective, seed=seed)
    manifest.add_input(metrics_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "bootstrap.json"
    csv_path = out_dir / "bootstrap.csv"
    _json_dump(trend.to_dict(), json_path)
    trend.frame().to_csv(csv_path, index=False)
    manifest.add_output(json_path)
    manifest.add_output(csv_path)
    manifest.write(out_dir)
    return EXIT_OK


def cmd_project(args: argparse.Namespace, config: dict) -> int:
    s = _Settings(args, config, "project")
    metrics_path = s.get("metrics")
    out_dir = Path(s.get("out"))
    per_page = int(s.get("per_page", 12))
    highlight = [h for h in (s.get("highlight") or "").split(",") if h]

    df = _read_metrics(metrics_path)
    profiles = atlas.poet_profiles(df)
    meter_prof = atlas.meter_profiles(df)
    projection = atlas.pca_project(profiles)

    manifest = ManifestWriter("project", s.effective, seed=None)
    manifest.add_input(metrics_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    profiles_path = out_dir / "profiles.csv"
    atlas.profiles_frame(profiles).to_csv(profiles_path, index=False)
    meter_path = out_dir / "meter_profiles.csv"
    atlas.meter_profiles_frame(meter_prof).to_csv(meter_path, index=False)
    projection_path = out_dir / "projection.json"
    _json_dump(projection.to_dict(), projection_path)

    fp_dir = out_dir / "fingerprints"
    fp_dir.mkdir(parents=True, exist_ok=True)
    pages = render.render_fingerprint(profiles, per_page=per_page)
    page_paths = []
    for i, doc in enumerate(pages, start=1):
        p = fp_dir / f"page_{i:02d}.svg"
        p.write_text(doc, encoding="utf-8")
        page_paths.append(p)
    space_path = out_dir / "space.svg"
    space_path.write_text(render.render_space(projection, highlight), encoding="utf-8")

    for p in [profiles_path, meter_path, projection_path, space_path, *page_paths]:
        manifest.add_output(p)
    manifest.write(out_dir)
    return EXIT_OK


_REPORT_SECTIONS = (
    ("attrition", "attrition.json"),
    ("fit_hardness", "fit_hardness.json"),
    ("fit_sonority", "fit_sonority.json"),
    ("fit_sibilance", "fit_sibilance.json"),
    ("nested_r2", "nested.json"),
    ("effect_correlations", "effect_correlations.json"),
    ("bootstrap", "bootstrap.json"),
    ("projection", "projection.json"),
)


def _frame_records(path: Path) -> list[dict]:
    df = pd.read_csv(path)
    df = df.astype(object).where(pd.notna(df), None)
    return df.to_dict(orient="records")


def cmd_report(args: argparse.Namespace, config: dict) -> int:
    s = _Settings(args, config, "report")
    in_dir = Path(s.get("in_dir"))
    out_path = Path(s.get("out"))
    _require_inputs(in_dir)

    def find(name: str) -> Path | None:
        hits = sorted(in_dir.rglob(name))
        if len(hits) > 1:
            log.warning("multiple %s under %s; using %s", name, in_dir, hits[0])
        return hits[0] if hits else None

    report: dict[str, object] = {"tool": "phonostyle", "version": __version__}
    inputs: list[Path] = []
    for key, filename in _REPORT_SECTIONS:
        p = find(filename)
        if p is None:
            report[key] = None
            continue
        report[key] = json.loads(p.read_text(encoding="utf-8"))
        inputs.append(p)
    for key, filename in (("meter_profiles", "meter_profiles.csv"), ("poet_profiles", "profiles.csv")):
        p = find(filename)
        if p is None:
            report[key] = None
            continue
        report[key] = _frame_records(p)
        inputs.append(p)
    within: dict[str, object] = {}
    for p in sorted(in_dir.rglob("within_meter_*.json")):
        payload = json.loads(p.read_text(encoding="utf-8"))
        within[payload.get("meter", p.stem)] = payload
        inputs.append(p)
    report["within_meter"] = within or None
    trends: dict[str, object] = {}
    for p in sorted(in_dir.rglob("century_trend_*.json")):
        trends[p.stem.removeprefix("century_trend_")] = json.loads(p.read_text(encoding="utf-8"))
        inputs.append(p)
    report["century_trends"] = trends or None

    manifest = ManifestWriter("report", s.effective, seed=None)
    for p in inputs:
        manifest.add_input(p)
    _json_dump(report, out_path)
    manifest.add_output(out_path)
    manifest.write(out_path.parent)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, config: dict) -> int:
    s = _Settings(args, config, "synth")
    out_dir = Path(s.get("out"))
    preset = s.get("preset", "demo")
    seed = int(s.get("seed", DEFAULT_SEED))
    mesras_per_poet = s.get("mesras_per_poet")

    if preset == "demo":
        spec = synth.demo_spec(seed=seed, mesras_per_poet=int(mesras_per_poet or 1200))
    elif preset == "confounded":
        spec = synth.confounded_spec(seed=seed, mesras_per_poet=int(mesras_per_poet or 2500))
    elif preset == "large":
        spec = synth.demo_spec(seed=seed, mesras_per_poet=int(mesras_per_poet or 150_000))
    else:
        raise ConfigError(f"unknown synth preset {preset!r}")
    df = synth.generate_corpus(spec)

    manifest = ManifestWriter("synth", s.effective, seed=seed)
    paths = synth.write_corpus_files(df, spec, out_dir)
    for p in paths.values():
        manifest.add_output(p)
    manifest.write(out_dir)
    log.info("synth: %d mesras, %d poets", len(df), len(spec.poets))
    return EXIT_OK


# ------------------------------------------------------------------- parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phonostyle",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"phonostyle {__version__}")
    parser.add_argument("--config", help="JSON config file (or set PHONOSTYLE_CONFIG)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", help="normalize raw corpus tables and carve the cohort")
    p.add_argument("--corpus", nargs="+", required=True, help="corpus table(s)")
    p.add_argument("--aliases", required=True, help="poet alias table (raw<TAB>canonical)")
    p.add_argument("--meters", required=True, help="meter map (raw<TAB>canonical)")
    p.add_argument("--centuries", help="poet century map (poet_id<TAB>century)")
    p.add_argument("--min-cell", dest="min_cell", type=int, help="minimum mesras per poet-meter cell (default 2000)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--delimiter", help="field delimiter of corpus tables (default tab)")
    p.add_argument("--mesra-delim", dest="mesra_delim", action="append", help="structural mesra delimiter (repeatable; default tab)")
    p.add_argument("--retained-meters", dest="retained_meters", help="comma-separated canonical meter keys")
    p.add_argument("--no-require-form", dest="no_require_form", action="store_true", default=None)
    p.add_argument("--no-require-meter", dest="no_require_meter", action="store_true", default=None)
    p.add_argument("--threads", type=int, help="parallel corpus file readers")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("metrics", help="parse streams and compute the six measures")
    p.add_argument("--cohort", required=True)
    p.add_argument("--features", help="feature table (default: bundled table)")
    p.add_argument("--rules", help="grapheme rule table for rule_g2p mode")
    p.add_argument("--mode", choices=[m.value for m in ParseMode])
    p.add_argument("--policy", choices=[p_.value for p_ in UnknownPolicy])
    p.add_argument("--out", required=True, help="output metrics CSV path")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("fit", help="controlled regressions and derived analyses")
    p.add_argument("--metrics", required=True)
    p.add_argument("--spec", help="ModelSpec JSON file")
    p.add_argument("--primary", action="store_true", help="fit all three primary outcomes")
    p.add_argument("--nested", action="store_true", help="incremental R-squared ledger")
    p.add_argument("--within-meter", dest="within_meter", metavar="METER|all")
    p.add_argument("--century-trend", dest="century_trend", metavar="OUTCOME|all")
    p.add_argument("--outcome", help="outcome for --nested (default hardness)")
    p.add_argument("--min-cell", dest="min_cell", type=int, help="within-meter poet support threshold")
    p.add_argument("--method", choices=["auto", "dense", "absorb"])
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bootstrap", help="poem bootstrap of century trends")
    p.add_argument("--metrics", required=True)
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--min-poems", dest="min_poems", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("project", help="poet profiles, fingerprints and the style space")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--highlight", help="comma-separated poet ids to color in the space plot")
    p.add_argument("--per-page", dest="per_page", type=int, help="fingerprint panels per page (8-12)")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("report", help="bundle all artifacts into one JSON report")
    p.add_argument("--in", dest="in_dir", required=True, help="directory holding prior stage outputs")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--preset", choices=["demo", "confounded", "large"])
    p.add_argument("--seed", type=int)
    p.add_argument("--mesras-per-poet", dest="mesras_per_poet", type=int)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except MissingInputError as e:
        _fail(e)
        return EXIT_MISSING_INPUT
    except (SchemaError, ConfigError) as e:
        _fail(e)
        return EXIT_SCHEMA
    except PhonostyleError as e:
        _fail(e)
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001 - last-resort CLI boundary
        print(f"phonostyle: error=unexpected detail={_one_line(e)}", file=sys.stderr)
        return EXIT_UNEXPECTED


def _one_line(e: Exception) -> str:
    return " ".join(str(e).split())


def _fail(e: PhonostyleError) -> None:
    print(f"phonostyle: error={e.code} detail={_one_line(e)}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
