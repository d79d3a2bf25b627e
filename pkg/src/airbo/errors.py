"""Exception hierarchy shared across the package.

``InputError`` (and subclasses) signal bad configuration or bad input
files; the CLI maps them to exit code 2. ``NumericalError`` signals an
unrecoverable numerical failure at runtime; the CLI maps it to exit
code 1.
"""


class AirboError(Exception):
    """Base class for all package errors."""


class InputError(AirboError):
    """Invalid user input: bad arguments, malformed files, bad config."""


class ParseError(InputError):
    """Malformed input file; message carries the offending line number."""


class SpecMismatchError(InputError):
    """Kernel spec of an artifact does not match the requested one."""


class DegenerateSnapshotError(InputError):
    """Snapshot unusable for a metric (e.g. true maximum exactly zero)."""


class NumericalError(AirboError):
    """Linear-algebra failure that survived all recovery attempts."""
