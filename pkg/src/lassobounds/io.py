"""File formats: headerless CSV matrices, JSON with 17-digit floats, TOML/JSON configs.

All writes go through a temporary file in the target directory followed by
an atomic rename, so readers never see a half-written report.
"""

from __future__ import annotations

import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import InputError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def fmt(x: float) -> str:
    """Round-trip representation with 17 significant digits."""
    return format(float(x), ".17g")


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_matrix_csv(path) -> np.ndarray:
    """Headerless comma-separated matrix; errors name the offending row and column."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    rows = []
    width = None
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise InputError(f"{path}: row {i} has {len(cells)} columns, expected {width}")
        row = []
        for j, cell in enumerate(cells, start=1):
            try:
                val = float(cell)
            except ValueError:
                raise InputError(f"{path}: row {i}, column {j}: cannot parse {cell.strip()!r} "
                                 "as a number") from None
            if not math.isfinite(val):
                raise InputError(f"{path}: row {i}, column {j}: non-finite value")
            row.append(val)
        rows.append(row)
    if not rows:
        raise InputError(f"{path}: empty matrix")
    return np.array(rows, dtype=np.float64)


def read_vector_csv(path) -> np.ndarray:
    """Single column (one value per line) or a single row."""
    M = read_matrix_csv(path)
    if M.shape[1] == 1:
        return M[:, 0]
    if M.shape[0] == 1:
        return M[0]
    raise InputError(f"{path}: expected a single row or column, got shape {M.shape}")


def matrix_to_csv(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return "".join(",".join(fmt(v) for v in row) + "\n" for row in M)


def write_matrix_csv(path, M) -> None:
    atomic_write(path, matrix_to_csv(M))


def write_vector_csv(path, v) -> None:
    atomic_write(path, "".join(fmt(x) + "\n" for x in np.ravel(v)))


def _encode(obj):
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_encode(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _Float(obj)
    return obj


class _Float(float):
    """Float that JSON-encodes with 17 significant digits (non-finite as strings)."""

    def __repr__(self):
        if math.isfinite(self):
            return fmt(self)
        return '"inf"' if self > 0 else ('"-inf"' if self < 0 else '"nan"')


class _Encoder(json.JSONEncoder):
    def iterencode(self, o, _one_shot=False):
        return _iterencode(o, 0, self.indent)


def _iterencode(o, level, indent):
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," if indent else ", "
    if isinstance(o, dict):
        if not o:
            yield "{}"
            return
        yield "{"
        first = True
        for k, v in o.items():
            yield ("" if first else sep) + pad + json.dumps(k) + ": "
            yield from _iterencode(v, level + 1, indent)
            first = False
        yield end + "}"
    elif isinstance(o, list):
        if not o:
            yield "[]"
            return
        yield "["
        first = True
        for v in o:
            yield ("" if first else sep) + pad
            yield from _iterencode(v, level + 1, indent)
            first = False
        yield end + "]"
    elif isinstance(o, _Float):
        yield repr(o)
    else:
        yield json.dumps(o)


def dumps(obj, indent: int = 2) -> str:
    return "".join(_Encoder(indent=indent).iterencode(_encode(obj))) + "\n"


def write_json(path, obj) -> None:
    atomic_write(path, dumps(obj))


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_config(path) -> dict:
    """TOML config; files ending in ``.json`` (or failing TOML parsing but valid JSON) load as JSON."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return read_json(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        try:
            return json.loads(raw)
        except ValueError:
            raise InputError(f"{path}: {exc}") from None


def trials_to_csv(trials) -> str:
    if not trials:
        return ""
    rows = [t.row() for t in trials]
    keys = list(rows[0].keys())
    out = [",".join(keys) + "\n"]
    for r in rows:
        cells = []
        for k in keys:
            v = r.get(k, "")
            if isinstance(v, (bool, np.bool_)):
                cells.append(str(int(v)))
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            elif isinstance(v, (float, np.floating)):
                cells.append(fmt(v))
            else:
                cells.append(str(v))
        out.append(",".join(cells) + "\n")
    return "".join(out)
