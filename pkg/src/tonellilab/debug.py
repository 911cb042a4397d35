"""Leveled diagnostics on standard error.

Level 1 (`-v`) reports per-class results and stage timings; level 2 (`-vv`)
adds sweep-by-sweep residuals of value iteration and Newton iteration counts.
"""

import time
from collections.abc import Iterator
from contextlib import contextmanager
from typing import Any

from rich.console import Console

DEBUG_LEVEL = 0

# stdout is reserved for oracle values
console = Console(stderr=True, highlight=False)


def set_debug_level(level: int) -> None:
    """Set the debug level."""
    global DEBUG_LEVEL
    DEBUG_LEVEL = level


def debug_enabled(level: int = 1) -> bool:
    """Whether messages of `level` are printed; lets callers skip building costly summaries."""
    return level <= DEBUG_LEVEL


def debug_print(message: str, *args: Any, level: int = 1) -> None:
    """Print a diagnostic if the debug level is high enough.

    Args:
        message: A `str.format` template, printed as-is when no args are given
        *args: Values substituted into the template
        level: Debug level required to print this message
    """
    if not debug_enabled(level):
        return
    console.print(message.format(*args) if args else message, markup=False)


@contextmanager
def debug_timer(stage: str, level: int = 1) -> Iterator[None]:
    """Report the wall-clock time spent in a stage, even when it raises."""
    start = time.perf_counter()
    try:
        yield
    finally:
        debug_print("{} took {:.2f}s", stage, time.perf_counter() - start, level=level)
