"""Exception hierarchy shared across the package.

Everything raised on purpose derives from CoagulationError so callers can
catch one base class; the CLI maps each subclass to a distinct exit code.
"""

from __future__ import annotations


class CoagulationError(Exception):
    """Base class for all errors raised by this package."""


class SpecValidationError(CoagulationError, ValueError):
    """Model instance is malformed (shapes, signs, normalization, zero kernel)."""


class CriticalityError(CoagulationError, ValueError):
    """A subcritical time was required but t >= T_c (or t outside its domain)."""


class HypothesisError(CoagulationError, ValueError):
    """A hypothesis of the requested computation is violated (e.g. some p_i = 0)."""


class ConvergenceError(CoagulationError, RuntimeError):
    """An iterative solver exhausted max_iter without reaching its tolerance."""


class IntegrationError(CoagulationError, RuntimeError):
    """Time integration produced a non-finite or significantly negative state."""


class NumericalBreakdownError(CoagulationError, ArithmeticError):
    """Cancellation destroyed a result (e.g. signed sum below -1e-10)."""
