"""
Domain errors for balanced-embed.

Every error carries a human readable `detail` and the process `exit_code`
the CLI returns when it escapes a command. None of them derive from
ValueError, so raising one inside a pydantic validator propagates as-is
instead of being folded into a ValidationError.
"""

from typing import Any, Optional


class BalancedEmbedError(Exception):
    """Base error: detail + exit code."""

    exit_code: int = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None, partial: Optional[Any] = None):
        super().__init__(detail)
        self.detail = detail
        # whatever the failed operation managed to produce, e.g. a refused trace
        self.partial = partial
        if exit_code is not None:
            self.exit_code = exit_code


class InvalidPointError(BalancedEmbedError):
    """Zero (or non-finite) homogeneous coordinate vector."""


class InconsistentTangentError(BalancedEmbedError):
    """Tangent vector not orthogonal to its base point."""


class InvalidDirectionError(BalancedEmbedError):
    """Direction is not a traceless Hermitian matrix."""


class DegenerateParametrizationError(BalancedEmbedError):
    """Curve parametrization vanishes (base point) or collapses to a point."""


class ConfigurationError(BalancedEmbedError):
    """Quadrature or solver settings outside their documented ranges."""


class NumericalFailureError(BalancedEmbedError):
    """A residual or operator became non-finite."""


class NoBalancedModelError(BalancedEmbedError):
    """Newton polish could not balance a point configuration."""


class DegenerateSourceError(BalancedEmbedError):
    """A point source could not supply points in general position."""


class UnstableConfigurationError(BalancedEmbedError):
    """Auxiliary configuration failed the stability precheck."""


class UsageError(BalancedEmbedError):
    exit_code = 2


class SchemeFileError(BalancedEmbedError):
    exit_code = 3
