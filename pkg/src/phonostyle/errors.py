"""Exception hierarchy shared across the pipeline.

Every error carries a short machine-readable ``code`` used by the CLI to
pick an exit status and emit a single-line diagnostic.
"""

from __future__ import annotations


class PhonostyleError(Exception):
    """Base class for all pipeline errors."""

    code = "error"


class ConfigError(PhonostyleError):
    """Bad configuration: conflicting alias rows, malformed config file."""

    code = "config"


class MissingInputError(PhonostyleError):
    """A referenced input file does not exist."""

    code = "missing-input"


class SchemaError(PhonostyleError):
    """An input file exists but violates its declared schema."""

    code = "schema"


class FeatureTableError(SchemaError):
    """Feature-table rows violate the articulatory band constraints.

    ``violations`` lists every offending row, not just the first.
    """

    code = "feature-table"

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class StreamError(PhonostyleError):
    """A mesra could not be turned into a usable symbol stream."""

    code = "stream"


class EmptyCohortError(PhonostyleError):
    """Cohort filtering removed every record."""

    code = "empty-cohort"


class DesignError(PhonostyleError):
    """The regression design cannot be built (single-level factor, ...)."""

    code = "design"


class FitError(PhonostyleError):
    """Model estimation failed."""

    code = "fit"


class RankDeficiencyError(FitError):
    """The design matrix is rank deficient; names the dependent columns."""

    code = "rank-deficient"

    def __init__(self, columns: list[str]):
        self.columns = list(columns)
        super().__init__(f"rank deficient design; dependent columns: {', '.join(self.columns)}")


class ConvergenceError(FitError):
    """Alternating within-group demeaning did not converge."""

    code = "no-convergence"
