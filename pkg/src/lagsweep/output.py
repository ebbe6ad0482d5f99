"""Deterministic JSON and CSV emission."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from typing import Any, Iterable

import numpy as np
import scipy

from . import __version__


def fmt_float(x: float) -> str:
    """17 significant digits; non-finite values become null."""
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON with sorted keys and fixed float formatting, so equal inputs give equal bytes."""

    def enc(o: Any, depth: int) -> str:
        o = _plain(o)
        pad = " " * (indent * (depth + 1))
        end = " " * (indent * depth)
        if o is None or isinstance(o, bool):
            return json.dumps(o)
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return fmt_float(o)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, depth + 1)}" for k, v in sorted(o.items())]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(isinstance(_plain(v), (int, float)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(enc(v, depth + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, depth + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


def versions() -> dict:
    return {
        "lagsweep": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def to_csv(header: list[str], rows: Iterable[Iterable[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, float) else v for v in (_plain(x) for x in row)])
    return buf.getvalue()
