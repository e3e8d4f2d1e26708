"""Shared error types and resource limits.

Limits are read from a context variable so the CLI can override them per
invocation without mutating module state.
"""
from __future__ import annotations

import contextlib
import contextvars
import os
from dataclasses import dataclass, replace


class LimitExceeded(ValueError):
    """A computation would exceed a configured size bound."""


class WindowError(ValueError):
    """A vertex or result falls outside the active window."""


class ParseError(ValueError):
    """Malformed textual input; carries an optional line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class Limits:
    max_degree: int = 100_000
    max_closure: int = 1_000_000
    max_points: int = 100_000
    window_R: int = 6
    window_D: int = 6
    search_depth: int = 4


def _from_env() -> Limits:
    lim = Limits()
    env = os.environ.get("SCALELAB_MAX_POINTS")
    if env:
        lim = replace(lim, max_points=int(env))
    return lim


_current: contextvars.ContextVar[Limits | None] = contextvars.ContextVar("scalelab_limits", default=None)


def current() -> Limits:
    lim = _current.get()
    return lim if lim is not None else _from_env()


@contextlib.contextmanager
def using(**overrides):
    """Temporarily override limits, e.g. ``with using(max_points=10): ...``."""
    token = _current.set(replace(current(), **overrides))
    try:
        yield current()
    finally:
        _current.reset(token)


def check_points(n: int, what: str = "point count") -> None:
    lim = current().max_points
    if n > lim:
        raise LimitExceeded(f"{what} {n} exceeds max_points={lim}")
