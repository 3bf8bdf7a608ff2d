"""Exception taxonomy shared by every module in the package.

Four failure families keep call sites honest about what went wrong:
shape problems, bad configuration, violated call contracts, and
operations issued in the wrong lifecycle state.
"""

from __future__ import annotations


class RallycastError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(RallycastError, ValueError):
    """Operand shapes are incompatible; message names both shapes."""


class ConfigurationError(RallycastError, ValueError):
    """A knob (hyperparameter, CLI flag, generator setting) is out of range."""


class ContractError(RallycastError, ValueError):
    """A call violated a documented precondition."""


class StateError(RallycastError, RuntimeError):
    """An operation was issued in the wrong lifecycle state."""


class ValidationError(RallycastError, ValueError):
    """Input data (rally, request payload) failed a semantic check."""


class ParseError(RallycastError, ValueError):
    """Raw input could not be parsed; message carries the line number."""
