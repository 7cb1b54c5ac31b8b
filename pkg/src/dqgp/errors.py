"""Error taxonomy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, NumericError -> 3,
FormatError and OS errors -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration value or schema violation."""


class StructureError(ValueError):
    """Structurally invalid input: dimension mismatch, bad index, wrong shape."""


class NumericError(ArithmeticError):
    """Numerical failure (conditioning, non-finite values).

    ``jitter_trail`` records the diagonal jitters attempted before giving up,
    when the failure came from a Cholesky factorization.
    """

    def __init__(self, message, jitter_trail=None):
        super().__init__(message)
        self.jitter_trail = tuple(jitter_trail) if jitter_trail else ()


class DegenerateRangeError(NumericError):
    """Target range is zero, so range-normalized metrics are undefined."""


class FormatError(ValueError):
    """Malformed data file (CSV, HGT, config text)."""
