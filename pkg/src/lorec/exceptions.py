"""Error types shared across the package.

Invalid arguments raise plain ValueError; these classes cover failures of
the numerics themselves, so callers (and the CLI exit-code mapping) can
tell the two apart.
"""


class NumericError(RuntimeError):
    """A computation produced non-finite values or an eigensolver failed."""


class SingularMatrixError(NumericError):
    """A matrix required to be invertible is singular or nearly so."""
