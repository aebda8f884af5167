"""Exception taxonomy shared across the package.

Exit-code mapping used by the CLI:
    ConfigurationError / FormatError -> 2 (bad data or files)
    argparse usage errors            -> 1
    verification failures            -> 3
"""


class AdaptcrnError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(AdaptcrnError):
    """Inconsistent shapes, invalid hyperparameters, or weight/config mismatch."""


class FormatError(AdaptcrnError):
    """Malformed external data: WAV files, weight files, config JSON."""


class UnsupportedModeError(AdaptcrnError):
    """A valid configuration used in a mode that cannot support it
    (e.g. global-utterance attention inside a streaming session)."""
