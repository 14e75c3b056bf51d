"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage problems exit 1,
validation/configuration problems exit 2, runtime failures exit 3.
"""

from __future__ import annotations


class DialignError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(DialignError):
    """Two profiles (or a profile and a checkpoint) disagree on schema."""


class ConfigError(DialignError):
    """A configuration object is internally inconsistent or out of range."""


class ProtocolError(DialignError):
    """An API was driven out of order, e.g. step() after the episode ended."""


class CheckpointError(DialignError):
    """A checkpoint file is missing fields or incompatible with the run."""
