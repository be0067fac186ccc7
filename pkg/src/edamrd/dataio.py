"""Signal ingestion (CSV / JSONL) and atomic file writes."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass

from .errors import DataError, EdamrdError, FileError
from .signal_core import Signal


@dataclass(frozen=True, eq=False)
class Record:
    signal: Signal
    label: int | None = None
    split: str | None = None


def atomic_write(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise FileError(str(exc), path) from exc


def read_csv(path, fs: float | None) -> list[Record]:
    """One window, one sample per row under a ``value`` header."""
    if fs is None:
        raise DataError("CSV input needs a sampling rate (--fs)", path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["value"]:
                raise DataError("expected a single 'value' header column", path, 1)
            values = []
            for lineno, row in enumerate(reader, start=2):
                if not row or not "".join(row).strip():
                    continue
                try:
                    values.append(float(row[0]))
                except (ValueError, IndexError):
                    raise DataError(f"not a number: {row!r}", path, lineno) from None
    except OSError as exc:
        raise DataError(str(exc), path) from exc
    try:
        return [Record(Signal(values, fs))]
    except EdamrdError as exc:
        raise DataError(str(exc), path) from exc


def read_jsonl(path, fs: float | None = None) -> list[Record]:
    """One window per line: ``{"fs": 100.0, "samples": [...]}``.

    Optional keys ``label`` and ``split`` carry dataset annotations. ``fs``
    falls back to the argument when a line omits it.
    """
    records = []
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError(str(exc), path) from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid JSON ({exc.msg})", path, lineno) from None
            if not isinstance(obj, dict) or "samples" not in obj:
                raise DataError("expected an object with a 'samples' array", path, lineno)
            rate = obj.get("fs", fs)
            if rate is None:
                raise DataError("missing 'fs'", path, lineno)
            label = obj.get("label")
            if label is not None and (not isinstance(label, int) or isinstance(label, bool)):
                raise DataError(f"label must be an integer, got {label!r}", path, lineno)
            try:
                sig = Signal(obj["samples"], rate)
            except (EdamrdError, TypeError, ValueError) as exc:
                raise DataError(str(exc), path, lineno) from None
            records.append(Record(sig, label, obj.get("split")))
    return records


def read_signals(path, fs: float | None = None) -> list[Record]:
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".csv":
        return read_csv(path, fs)
    if ext in (".jsonl", ".ndjson", ".json"):
        return read_jsonl(path, fs)
    raise DataError(f"unsupported input extension {ext!r} (use .csv or .jsonl)", path)


def record_line(record: Record) -> str:
    obj = {"fs": record.signal.fs, "samples": record.signal.samples.tolist()}
    if record.label is not None:
        obj["label"] = int(record.label)
    if record.split is not None:
        obj["split"] = record.split
    return json.dumps(obj)


def write_jsonl(records, path) -> None:
    atomic_write(path, "".join(record_line(r) + "\n" for r in records).encode())
