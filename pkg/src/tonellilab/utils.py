"""Utility functions for tonellilab: number formatting, result files and thread limits."""

import csv
import io
import json
import math
import os
import tempfile
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

from . import __version__

TOOL_NAME = "tonellilab"


def format_float(value: float) -> str:
    """Format a float with 17 significant digits (round-trip exact)."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.17g}"


def to_plain(value: Any) -> Any:
    """Convert numpy values, pydantic models and tuples into plain JSON-ready Python values."""
    if value is None or isinstance(value, bool | str):
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, int | np.integer):
        return int(value)
    if isinstance(value, float | np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return [to_plain(item) for item in value.tolist()]
    if isinstance(value, BaseModel):
        return to_plain(value.model_dump(mode="json"))
    if isinstance(value, Mapping):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple | set | frozenset):
        items = sorted(value) if isinstance(value, set | frozenset) else value
        return [to_plain(item) for item in items]
    if hasattr(value, "to_dict") and callable(value.to_dict):
        return to_plain(value.to_dict())
    return str(value)


def dumps17(value: Any, indent: int = 2) -> str:
    """Serialize to JSON, writing every float with 17 significant digits.

    Non-finite floats are written as null.
    """
    return _emit(to_plain(value), indent, 0) + "\n"


def _emit(value: Any, indent: int, depth: int) -> str:
    pad = " " * (indent * (depth + 1))
    end_pad = " " * (indent * depth)
    if isinstance(value, float):
        return format_float(value) if math.isfinite(value) else "null"
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_emit(v, indent, depth + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end_pad + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        # Flat numeric lists stay on one line
        if all(not isinstance(v, dict | list) for v in value):
            return "[" + ", ".join(_emit(v, indent, depth + 1) for v in value) + "]"
        items = [pad + _emit(v, indent, depth + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end_pad + "]"
    return json.dumps(value)


def atomic_write(path: Path, text: str) -> None:
    """Write text to path atomically (temporary file in the same directory, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render a CSV table; floats use 17 significant digits."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(cell) for cell in row])
    return buffer.getvalue()


def _csv_cell(cell: Any) -> str:
    if isinstance(cell, bool | np.bool_):
        return "1" if cell else "0"
    if isinstance(cell, int | np.integer):
        return str(int(cell))
    if isinstance(cell, float | np.floating):
        return format_float(float(cell))
    return str(cell)


def result_document(config: Any, result: Any) -> dict[str, Any]:
    """Wrap a result with the tool name, version and config echo."""
    return {"tool": TOOL_NAME, "version": __version__, "config": to_plain(config), "result": to_plain(result)}


def write_json_result(path: Path, config: Any, result: Any) -> Path:
    """Write a JSON result file with config echo."""
    atomic_write(Path(path), dumps17(result_document(config, result)))
    return Path(path)


def meta_path(csv_path: Path) -> Path:
    """Sidecar metadata path of a CSV result file."""
    csv_path = Path(csv_path)
    return csv_path.with_name(f"{csv_path.stem}.meta.json")


def write_csv_result(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], config: Any, meta: Mapping[str, Any]
) -> Path:
    """Write a CSV table plus its `<stem>.meta.json` sidecar."""
    path = Path(path)
    atomic_write(path, csv_text(header, rows))
    atomic_write(meta_path(path), dumps17(result_document(config, dict(meta))))
    return path


def thread_count() -> int:
    """Number of worker threads, capped by TONELLI_THREADS."""
    available = os.cpu_count() or 1
    raw = os.environ.get("TONELLI_THREADS")
    if not raw:
        return available
    try:
        requested = int(raw)
    except ValueError:
        return available
    return max(1, min(requested, available))
