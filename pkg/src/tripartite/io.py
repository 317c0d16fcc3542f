"""CSV emission with JSON provenance sidecars."""
from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import EitSpectrum, TimeSeries

SIG_DIGITS = 12
EIT_COLUMNS = ("delta1", "mean_n1_at_tstar")


def _fmt(x) -> str:
    return f"{float(x):.{SIG_DIGITS}g}"


def _atomic_write(path: Path, text: str) -> None:
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


def table_text(columns, rows) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _as_table(obj):
    if isinstance(obj, EitSpectrum):
        return EIT_COLUMNS, zip(obj.delta1_grid, obj.values)
    if isinstance(obj, TimeSeries):
        return ("t", obj.label or "value"), zip(obj.times, obj.values)
    if isinstance(obj, dict):
        cols = tuple(obj)
        return cols, zip(*(np.asarray(obj[c]) for c in cols))
    raise TypeError(f"cannot emit {type(obj).__name__}")


def emit_csv(obj, path, provenance: dict | None = None) -> Path:
    """Write ``obj`` (TimeSeries, EitSpectrum or column dict) to ``path``.

    A ``<path>.json`` sidecar is written next to it when provenance is given
    or the object is an EIT spectrum.
    """
    path = Path(path)
    cols, rows = _as_table(obj)
    _atomic_write(path, table_text(cols, rows))
    meta = dict(provenance or {})
    if isinstance(obj, EitSpectrum):
        meta.setdefault("t_star", obj.t_star)
        meta.setdefault("context", obj.context)
    if meta or isinstance(obj, EitSpectrum):
        write_sidecar(path, meta)
    return path


def write_sidecar(csv_path, meta: dict) -> Path:
    side = Path(str(csv_path) + ".json")
    payload = {"code_version": __version__, "columns_file": Path(csv_path).name}
    payload.update(meta)
    return write_json(side, payload)


def write_json(path, obj) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def read_csv(path) -> dict:
    """Columns of a file written by :func:`emit_csv` as float arrays."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}
