"""Error taxonomy shared across the package.

The CLI maps these onto exit codes: config problems exit 2, data problems
(including file format damage) exit 3, numeric blowups exit 4.
"""


class ConfigError(Exception):
    """Bad flag value, malformed config file, contradictory options."""


class DataError(Exception):
    """Input data is missing, malformed or inconsistent."""


class FormatError(DataError):
    """A binary grid file failed magic/size validation."""


class DimensionError(DataError):
    """Array ranks or shapes do not match the operation's contract."""


class DomainError(DataError):
    """Values fall outside the contracted domain (non-binary mask etc.)."""


class NumericError(Exception):
    """Non-finite activations or losses; carries enough context to debug."""
