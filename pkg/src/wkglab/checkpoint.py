"""Checkpoint files: a plain-text header followed by little-endian float64 blocks.

Layout::

    WKGLAB-CHECKPOINT
    schema = 1
    kind = cartesian
    time = 0x1.0000000000000p+1
    confined = 0
    nodes = 201
    unknowns = u,phi
    model = wkg c=1.0 ...
    end
    <r> <values[u]> <rates[u]> <values[phi]> <rates[phi]>

Floats in the header use ``float.hex`` so reading restores them bit for bit.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .foliation import SliceChart
from .state import EvolutionState

MAGIC = "WKGLAB-CHECKPOINT"
SCHEMA = 1
_DTYPE = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


def encode(state: EvolutionState, model: str = "") -> bytes:
    if "\n" in model:
        raise CheckpointError("model description must be a single line")
    names = list(state.values)
    if any("," in n or not n for n in names):
        raise CheckpointError("unknown names must be non-empty and comma-free")
    chart = state.chart
    header = [
        MAGIC,
        f"schema = {SCHEMA}",
        f"kind = {chart.kind}",
        f"time = {float(chart.time).hex()}",
        f"confined = {int(chart.confined)}",
        f"nodes = {chart.r.size}",
        f"unknowns = {','.join(names)}",
        f"model = {model}",
        "end",
    ]
    blocks = [np.asarray(chart.r, dtype=_DTYPE)]
    for n in names:
        blocks.append(np.asarray(state.values[n], dtype=_DTYPE))
        blocks.append(np.asarray(state.rates[n], dtype=_DTYPE))
    return ("\n".join(header) + "\n").encode("utf-8") + b"".join(b.tobytes() for b in blocks)


def decode(blob: bytes) -> tuple[EvolutionState, dict[str, str]]:
    meta: dict[str, str] = {}
    pos = 0
    first = True
    while True:
        nl = blob.find(b"\n", pos)
        if nl < 0:
            raise CheckpointError("truncated header")
        line = blob[pos:nl].decode("utf-8")
        pos = nl + 1
        if first:
            if line != MAGIC:
                raise CheckpointError("not a checkpoint file (bad magic line)")
            first = False
            continue
        if line == "end":
            break
        key, sep, value = line.partition(" = ")
        if not sep:
            raise CheckpointError(f"malformed header line {line!r}")
        meta[key] = value
    try:
        if int(meta["schema"]) != SCHEMA:
            raise CheckpointError(f"unsupported schema {meta['schema']}")
        nodes = int(meta["nodes"])
        names = meta["unknowns"].split(",") if meta["unknowns"] else []
        time = float.fromhex(meta["time"])
        kind = meta["kind"]
        confined = bool(int(meta["confined"]))
    except KeyError as exc:
        raise CheckpointError(f"missing header field {exc.args[0]!r}") from None
    data = np.frombuffer(blob, dtype=_DTYPE, offset=pos)
    expected = nodes * (1 + 2 * len(names))
    if data.size != expected:
        raise CheckpointError(f"payload holds {data.size} values, expected {expected}")
    blocks = data.reshape(1 + 2 * len(names), nodes).astype(np.float64)
    chart = SliceChart(time, blocks[0], kind, confined)
    values = {n: blocks[1 + 2 * i].copy() for i, n in enumerate(names)}
    rates = {n: blocks[2 + 2 * i].copy() for i, n in enumerate(names)}
    return EvolutionState(chart, values, rates), meta


def write_checkpoint(state: EvolutionState, path: str | os.PathLike, model: str = "") -> Path:
    path = Path(path)
    try:
        path.write_bytes(encode(state, model))
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc.strerror or exc}") from exc
    return path


def read_checkpoint(path: str | os.PathLike) -> tuple[EvolutionState, dict[str, str]]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from exc
    return decode(blob)
