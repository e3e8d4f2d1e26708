"""Exact computations with scale groups on regular trees and the
self-replicating groups attached to them."""

from .limits import LimitExceeded, Limits, ParseError, WindowError

__all__ = ["LimitExceeded", "Limits", "ParseError", "WindowError"]
__version__ = "0.1.0"
