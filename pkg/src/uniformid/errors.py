"""Shared error taxonomy.

Every error class carries a distinct process exit code so the CLI can
signal failure classes to scripts (documented in the README).
"""

from __future__ import annotations


class UniformIdError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(UniformIdError):
    """Bad command line or API usage (unknown subcommand, bad flags)."""

    exit_code = 2


class ConfigError(UniformIdError):
    """Invalid configuration value (thresholds, fractions, sizes)."""

    exit_code = 3


class SchemaViolation(UniformIdError):
    """A value breaks a schema invariant (missing item, bad normalization)."""

    exit_code = 4


class DataError(UniformIdError):
    """Missing or undecodable data: unknown ids, unreadable folders."""

    exit_code = 5


class CapacityError(ConfigError):
    """A generator was asked for more distinct outputs than exist."""

    exit_code = 6


class TrainingError(UniformIdError):
    """Training preconditions unmet or training failed to make progress."""

    exit_code = 7


class LeakageError(UniformIdError):
    """Evidence that evaluation data intersects training data."""

    exit_code = 8


class IntegrityError(UniformIdError):
    """Artifact or registry digest mismatch: refuse to use tampered files."""

    exit_code = 9


class DetectorError(UniformIdError):
    """A person-detector plugin failed; carries the plugin name."""

    exit_code = 10

    def __init__(self, plugin_name: str, message: str):
        super().__init__(f"detector '{plugin_name}': {message}")
        self.plugin_name = plugin_name


class StaleResultError(UniformIdError):
    """A search result refers to a registry digest that no longer matches."""

    exit_code = 11
