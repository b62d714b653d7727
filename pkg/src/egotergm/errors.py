"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit 2,
data problems exit 3, estimation failures exit 4.
"""
from __future__ import annotations


class EgoTergmError(Exception):
    """Base class for all package errors."""


class ConfigError(EgoTergmError):
    """Invalid run configuration or unsupported option."""


class UnsupportedFeatureError(ConfigError):
    """Requested a feature outside the supported surface (e.g. higher-order alters)."""


class DataError(EgoTergmError):
    """Malformed or inconsistent input data."""


class MissingAttributeError(DataError):
    """A model term references an attribute absent from the graph."""


class EstimationError(EgoTergmError):
    """Numerical estimation failed or its preconditions were not met."""


class IdentifiabilityError(EstimationError):
    """Model terms cannot be identified from the data (constant or empty columns)."""
