"""CSV series, κ-sweep reports and run manifests."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SERIES_HEADER = ("s", "sup_u", "sup_phi", "E0", "E1", "E2")
KAPPA_HEADER = ("kappa", "err_rho", "err_u", "err_phi")


def fmt(x: float) -> str:
    """17 significant digits: parses back to the identical double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.17g" % x


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _table(header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        buf.write(",".join(fmt(x) for x in row) + "\n")
    return buf.getvalue()


def series_rows(records) -> list[tuple[float, ...]]:
    """Rows of the series schema from trajectory records; missing energies are NaN."""
    rows = []
    for rec in records:
        rows.append((rec.time, rec.sup.get("u", 0.0), rec.sup.get("phi", 0.0),
                     *(rec.extra.get(f"E{n}", math.nan) for n in range(3))))
    return rows


def emit_series(records, path: str | os.PathLike) -> Path:
    records = list(records)
    if not records:
        raise ValueError("no records to emit")
    return _write(Path(path), _table(SERIES_HEADER, series_rows(records)))


def read_table(path: str | os.PathLike, header: Sequence[str] | None = None) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise ValueError(f"{path}: empty file")
    head = tuple(rows[0])
    if header is not None and head != tuple(header):
        raise ValueError(f"{path}: header {','.join(head)} does not match {','.join(header)}")
    try:
        cols = np.array([[float(x) for x in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    cols = cols.reshape(-1, len(head))
    return {name: cols[:, i] for i, name in enumerate(head)}


def read_series(path: str | os.PathLike) -> dict[str, np.ndarray]:
    return read_table(path, SERIES_HEADER)


def emit_kappa_report(report, path: str | os.PathLike) -> Path:
    rows = zip(report.kappas, report.err_rho, report.err_u, report.err_phi)
    return _write(Path(path), _table(KAPPA_HEADER, rows))


def write_manifest(path: str | os.PathLike, manifest: dict) -> Path:
    text = json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n"
    return _write(Path(path), text)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (set, frozenset, tuple)):
        return sorted(x) if isinstance(x, (set, frozenset)) else list(x)
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")
