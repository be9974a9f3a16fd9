"""Shared runtime plumbing: worker pool, atomic file output, number formatting.

Output formatting is deliberately rigid: identical inputs must produce
byte-identical CSV/JSON so golden-file tests work.
"""

from __future__ import annotations

import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "TIPSHIFT_THREADS"


def worker_count() -> int:
    """Worker cap from TIPSHIFT_THREADS, defaulting to machine parallelism."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 1
        return max(1, n)
    return max(1, os.cpu_count() or 1)


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Map preserving input order; runs on the capped worker pool."""
    n = worker_count()
    if n == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))


def fmt17(value: float) -> str:
    """Format a double with 17 significant digits (lossless round-trip)."""
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(float(value), ".17g")


def _json_escape(s: str) -> str:
    out = []
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "".join(out)


def to_json17(obj, indent: int = 0, _level: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits.

    The stdlib encoder serializes floats with repr(), whose digit count varies
    by value; a fixed format keeps golden files stable. Non-finite floats are
    emitted as strings since JSON has no literal for them.
    """
    pad = " " * (indent * (_level + 1)) if indent else ""
    end_pad = " " * (indent * _level) if indent else ""
    nl = "\n" if indent else ""
    sep = "," + nl
    colon = ": " if indent else ":"

    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return f'"{_json_escape(obj)}"'
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return '"nan"'
        if math.isinf(obj):
            return '"inf"' if obj > 0 else '"-inf"'
        return fmt17(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}"{_json_escape(str(k))}"{colon}{to_json17(v, indent, _level + 1)}'
            for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))
        ]
        return "{" + nl + sep.join(items) + nl + end_pad + "}"
    if isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{pad}{to_json17(v, indent, _level + 1)}" for v in seq]
        return "[" + nl + sep.join(items) + nl + end_pad + "]"
    # numpy scalars and anything float-like
    try:
        return to_json17(float(obj), indent, _level)
    except (TypeError, ValueError):
        raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def atomic_write_text(path: str, text: str) -> None:
    """Write via temp file + rename so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tipshift-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def csv_lines(header: str, rows: Iterable[Sequence]) -> str:
    """Render CSV with fmt17 floats; '\\n' newlines, trailing newline."""
    out = [header]
    for row in rows:
        out.append(",".join(fmt17(v) if isinstance(v, (float, int)) and not isinstance(v, bool) else str(v) for v in row))
    return "\n".join(out) + "\n"
