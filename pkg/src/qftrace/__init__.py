"""Numerical experiments on quantized differentials of quasi-Fuchsian limit sets."""

from .errors import NumericalError, QFTraceError, ValidationError

__version__ = "0.1.0"

__all__ = ["QFTraceError", "ValidationError", "NumericalError", "__version__"]
