"""On-disk cache for expensive grid computations such as alpha tables.

Entries are JSON files named `<kind>-<key>.json` in the cache root. The key is
a SHA-256 over the canonical form of the call's arguments plus the package
version, so a library upgrade never serves tables computed by older code.
"""

import functools
import hashlib
import inspect
import json
import os
from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
from pydantic import BaseModel, ValidationError
from xdg_base_dirs import xdg_cache_home

from . import __version__
from .debug import debug_print
from .utils import atomic_write, dumps17

CACHE_DIR = xdg_cache_home() / "tonellilab"
CACHE_DIR_ENV = "TONELLI_CACHE_DIR"

R = TypeVar("R")


def cache_root(create: bool = False) -> Path:
    """The cache directory: $TONELLI_CACHE_DIR if set, else the XDG cache home."""
    override = os.environ.get(CACHE_DIR_ENV)
    root = Path(override) if override else CACHE_DIR
    if create:
        root.mkdir(parents=True, exist_ok=True)
    return root


def canonical(value: Any) -> Any:
    """Reduce an argument to plain JSON data with a stable ordering.

    Arrays keep their shape. Lagrangians and Hamiltonians are keyed by
    their `to_dict()` parameters rather than by the callables they hold.
    """
    match value:
        case None | bool() | int() | float() | str():
            return value
        case np.generic():
            return value.item()
        case np.ndarray():
            return {"shape": list(value.shape), "data": canonical(value.ravel().tolist())}
        case list() | tuple():
            return [canonical(item) for item in value]
        case dict():
            return {str(k): canonical(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
        case BaseModel():
            return canonical(value.model_dump(mode="json"))
    if callable(getattr(value, "to_dict", None)):
        return canonical(value.to_dict())
    if hasattr(value, "__dict__"):
        return canonical(vars(value))
    return str(value)


def entry_key(kind: str, **params: Any) -> str:
    """Hex digest identifying one cache entry of `kind`."""
    payload = {"kind": kind, "version": __version__, "params": canonical(params)}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def entry_path(kind: str, key: str) -> Path:
    return cache_root(create=True) / f"{kind}-{key}.json"


def write_entry(kind: str, key: str, data: dict[str, Any]) -> None:
    """Store an entry atomically with floats at full precision."""
    atomic_write(entry_path(kind, key), dumps17(data))


def read_entry(kind: str, key: str) -> dict[str, Any] | None:
    """The stored entry, or None when it is missing or not valid JSON."""
    path = entry_path(kind, key)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        return None
    except (json.JSONDecodeError, OSError, UnicodeDecodeError):
        debug_print("Discarding corrupt cache entry {}", path.name, level=2)
        return None
    return data if isinstance(data, dict) else None


def cached(
    kind: str,
    dumper: Callable[[Any], dict[str, Any]],
    loader: Callable[[dict[str, Any]], Any],
    cache_schema: type[BaseModel] | None = None,
    ignore: tuple[str, ...] = ("progress", "task_id"),
) -> Callable[[Callable[..., R]], Callable[..., R]]:
    """Cache a function's results on disk, keyed by its bound arguments.

    Calling the wrapped function with `cached=False` skips both lookup and store.

    Args:
        kind: Entry kind, the file name prefix (e.g. "alpha_table")
        dumper: Turns a result into a JSON-ready dict
        loader: Rebuilds a result from what `dumper` wrote
        cache_schema: Pydantic model a stored entry must validate against; failing entries are recomputed
        ignore: Argument names left out of the key
    """

    def decorator(func: Callable[..., R]) -> Callable[..., R]:
        signature = inspect.signature(func)

        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> R:
            bound = signature.bind(*args, **kwargs)
            bound.apply_defaults()
            if bound.arguments.get("cached") is False:
                return func(*args, **kwargs)

            params = {k: v for k, v in bound.arguments.items() if k != "cached" and k not in ignore}
            key = entry_key(kind, **params)

            data = read_entry(kind, key)
            if data is not None and cache_schema is not None:
                try:
                    data = cache_schema.model_validate(data).model_dump()
                except ValidationError as e:
                    errors = e.error_count()
                    debug_print("Recomputing {} entry {}: {} schema error(s)", kind, key[:12], errors, level=2)
                    data = None
            if data is not None:
                try:
                    result = loader(data)
                except (KeyError, TypeError, ValueError):
                    debug_print("Ignoring unreadable {} entry {}", kind, key[:12], level=2)
                else:
                    debug_print("Using cached {} {}", kind, key[:12])
                    return result

            result = func(*args, **kwargs)
            write_entry(kind, key, dumper(result))
            return result

        return wrapper

    return decorator
