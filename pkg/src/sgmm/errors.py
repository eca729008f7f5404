"""Exception hierarchy shared across the package.

Everything derives from SgmmError so callers (and the CLI) can map failures
to exit codes without enumerating modules: ConfigError and UsageError mean
the caller's inputs were wrong (exit 2), anything else is a runtime failure
(exit 1).
"""


class SgmmError(Exception):
    """Base class for all package errors."""


class ShapeError(SgmmError, ValueError):
    """Tensor rank/shape rule violated (bad matmul dims, non-scalar backward, ...)."""


class NumericError(SgmmError, ValueError):
    """NaN/Inf reached an op that requires finite inputs."""


class InputError(SgmmError, ValueError):
    """Semantically invalid input value (empty sequence, bad label, ...)."""


class FormatError(SgmmError, ValueError):
    """A serialized artifact does not match its format contract.

    The message carries the location (byte offset or line number) whenever
    the underlying parser can provide one.
    """


class ValidationError(SgmmError, ValueError):
    """A structurally well-formed scene graph violates a graph invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConfigError(SgmmError, ValueError):
    """Invalid configuration value or combination."""


class DatasetError(SgmmError, ValueError):
    """One or more dataset records failed to load; carries every failure."""

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("\n".join(self.failures))
