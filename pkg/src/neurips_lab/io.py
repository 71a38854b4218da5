"""Small serialization helpers: atomic writes and stable number formatting."""

import csv
import io
import json
import os
import tempfile


def fmt(x):
    """17 significant digits, enough to round-trip a double."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _round_trip(obj):
    """Replace floats by 17-digit values so JSON text is stable across platforms."""
    if isinstance(obj, float):
        return float(format(obj, ".17g")) if obj == obj and abs(obj) != float("inf") else repr(obj)
    if isinstance(obj, dict):
        return {k: _round_trip(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_trip(v) for v in obj]
    if hasattr(obj, "item"):
        return _round_trip(obj.item())
    return obj


def dumps(obj):
    return json.dumps(_round_trip(obj), indent=2, sort_keys=True) + "\n"


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
