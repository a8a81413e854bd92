"""
Exception hierarchy shared by every levysphere module.

Most errors subclass ValueError so that callers (the CLI in particular) can
treat bad input uniformly.
"""

from typing import Any, Dict, List, Optional


class LevySphereError(Exception):
    """Base class for all levysphere errors."""


class ParameterError(LevySphereError, ValueError):
    """Invalid numerical parameter (stable index out of range, empty list, ...)."""


class AlignmentError(LevySphereError, ValueError):
    """A time or step is not aligned with the noise path grid."""


class RangeError(LevySphereError, ValueError):
    """A requested time window is not covered by the stored path or ledger."""


class DimensionError(LevySphereError, ValueError):
    """Truncation or grid sizes are incompatible."""


class MomentError(LevySphereError, ValueError):
    """A requested moment is infinite for the configured stable index."""


class ConfigError(LevySphereError, ValueError):
    """Configuration failed validation; carries every problem found."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__('\n'.join(self.errors))


class NoSolutionError(LevySphereError, RuntimeError):
    """A search (alpha selection) found no admissible value."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class BlowUpError(LevySphereError, RuntimeError):
    """Non-finite state produced during time integration."""

    def __init__(self, time: float, message: str = '', ledger: Any = None):
        self.time = time
        self.ledger = ledger
        super().__init__(message or f"Non-finite state at t={time:.6g}")


class DomainError(LevySphereError, ValueError):
    """Argument outside the domain of an operator (e.g. degree below l_min)."""
