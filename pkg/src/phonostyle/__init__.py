"""Phonetic texture analysis for hemistich-level poetry corpora.

The package turns delimited corpus tables into phonetic symbol streams,
computes six per-line texture measures (hardness, sonority, sibilance,
vowel ratio, consonant-cluster ratio, symbol entropy), and estimates
poet / meter / form contrasts with poem-clustered uncertainty. Aggregate
views (poet fingerprints, meter profiles, a PCA style space, century
bootstrap trends) are built on top of the same metric rows.

Subcommand pipeline: ``ingest -> metrics -> fit -> bootstrap -> project
-> report`` (see ``phonostyle --help``).
"""

__version__ = "0.1.0"

from .errors import PhonostyleError

__all__ = ["PhonostyleError", "__version__"]
