"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data and
persistence format problems exit 2, numerical failures exit 3, everything
else (shape/invariant violations, bugs) exits 4.
"""


class McmlpError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(McmlpError, ValueError):
    """Operand shapes are inconsistent with an operation's contract."""


class ConfigError(McmlpError, ValueError):
    """A configuration value violates a documented constraint."""


class DataFormatError(McmlpError, ValueError):
    """An input file does not conform to its binary or text format."""


class CheckpointError(DataFormatError):
    """Base class for checkpoint load failures."""


class CheckpointFormatError(CheckpointError):
    """Bad magic bytes or a structurally unreadable checkpoint."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an unsupported format version."""


class CheckpointChecksumError(CheckpointError):
    """Checkpoint payload does not match its trailing checksum."""


class CheckpointShapeError(CheckpointError):
    """Stored tensors disagree with the embedded model configuration."""


class NumericsError(McmlpError, RuntimeError):
    """A non-finite value appeared where finite values are required."""
