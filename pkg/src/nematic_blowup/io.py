"""CSV time series, npz snapshots/checkpoints and the run manifest."""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

FORMAT_VERSION = 1


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


class CsvSeries:
    """Append-only CSV with a fixed header; tracks its row count for checkpoints."""

    def __init__(self, path, columns, resume_rows: int | None = None):
        self.path = Path(path)
        self.columns = tuple(columns)
        header = ",".join(self.columns) + "\n"
        if resume_rows is None:
            with open(self.path, "w") as fh:
                fh.write(header)
            self.rows = 0
        else:
            self._truncate(header, resume_rows)
            self.rows = resume_rows

    def _truncate(self, header, rows):
        with open(self.path, "rb") as fh:
            lines = fh.read().split(b"\n")
        if lines[0].decode() + "\n" != header:
            raise ConfigurationError(f"{self.path} header does not match the expected columns")
        if len(lines) - 2 < rows:    # trailing empty piece after the final newline
            raise ConfigurationError(f"{self.path} has fewer than {rows} rows")
        keep = b"\n".join(lines[:rows + 1]) + b"\n"
        with open(self.path, "wb") as fh:
            fh.write(keep)

    def append(self, row: dict):
        line = ",".join(format_value(row.get(c, float("nan"))) for c in self.columns)
        with open(self.path, "a") as fh:
            fh.write(line + "\n")
        self.rows += 1


def read_csv(path) -> dict:
    """Columns of a series written by :class:`CsvSeries` as float arrays."""
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    data = np.atleast_1d(data)
    return {name: np.asarray(data[name], dtype=float) for name in data.dtype.names}


def _atomic_savez(path, **arrays):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp.npz")
    np.savez(tmp, **arrays)
    os.replace(tmp, path)


def save_container(path, kind: str, config_hash: str, arrays: dict, meta: dict):
    """npz container: named arrays plus a JSON header with version, kind, hash and metadata."""
    header = {"format_version": FORMAT_VERSION, "kind": kind, "config_hash": config_hash,
              "dimensions": {k: list(np.shape(v)) for k, v in arrays.items()}, "meta": meta}
    _atomic_savez(path, header=np.array(json.dumps(header, default=_jsonable)), **arrays)


def load_container(path, kind: str | None = None):
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        arrays = {k: z[k].copy() for k in z.files if k != "header"}
    if header.get("format_version") != FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported container version {header.get('format_version')!r}")
    if kind is not None and header.get("kind") != kind:
        raise ConfigurationError(f"{path}: expected a {kind}, found {header.get('kind')!r}")
    return header, arrays


def write_json(path, obj):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
    os.replace(tmp, path)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")
