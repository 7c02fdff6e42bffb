"""Error taxonomy shared across the package.

Every failure the library raises on purpose derives from CludiError so the
CLI can map library failures to exit code 1 while argparse keeps exit code 2
for usage errors.
"""


class CludiError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CludiError, ValueError):
    """An argument violated a documented precondition."""


class DataFormatError(CludiError, ValueError):
    """A file or byte stream does not conform to its declared format."""


class NumericalFailure(CludiError, ArithmeticError):
    """A computation produced a non-finite value.

    The message names the component (loss term, weight, ...) that went
    non-finite so training failures are diagnosable from the CLI.
    """
