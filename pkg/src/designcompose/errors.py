"""Exception hierarchy and warning categories.

Exit-code mapping used by the CLI: input-side failures (schema, validation,
config, unreadable assets) exit 1; backend and internal contract failures
exit 2.
"""

from __future__ import annotations


class DesignComposeError(Exception):
    """Base class for all library errors."""


class SchemaError(DesignComposeError):
    """Input text does not parse against the expected schema."""


class ValidationError(DesignComposeError):
    """Parsed input violates a document invariant."""


class ConfigError(DesignComposeError):
    """Invalid configuration value or unknown configuration name."""


class InputError(DesignComposeError):
    """Runtime input (asset file, vector, manifest) is unusable."""


class ContractError(DesignComposeError):
    """An internal operation was called outside its contract."""


class BackendError(DesignComposeError):
    """A model backend failed or rejected its input."""


class ElementCompositionError(DesignComposeError):
    """A foreground element failed to compose; carries the partial trace."""

    def __init__(self, element_id: str, cause: Exception, trace=None):
        super().__init__(f"element {element_id!r}: {cause}")
        self.element_id = element_id
        self.cause = cause
        self.trace = trace


class SchemaWarning(UserWarning):
    """Unknown fields or recoverable oddities in input documents."""


class DegenerateBoxWarning(UserWarning):
    """A bounding box rounded to zero pixel area and was clamped to 1x1."""
