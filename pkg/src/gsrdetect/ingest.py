"""Observation ingestion and serialization: CSV and JSON-lines.

CSV carries one observation per row with numeric columns as the dimensions
and an optional header; JSON-lines carries one array per line.  The
dimension is fixed by the first record and every value must be finite;
violations are reported with their line number.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from typing import Iterable, Iterator

import numpy as np

from .core import ObservationError


def sniff_format(source, default: str = "csv") -> str:
    """Guess csv vs jsonl from a path's extension."""
    name = os.fspath(source) if isinstance(source, (str, os.PathLike)) else ""
    ext = os.path.splitext(str(name))[1].lower()
    if ext in {".jsonl", ".ndjson", ".json"}:
        return "jsonl"
    if ext == ".csv":
        return "csv"
    return default


def _open_source(source):
    if source == "-":
        return sys.stdin, False
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), True
    return source, False


def _parse_csv(fh) -> Iterator[tuple[int, list[float]]]:
    reader = csv.reader(fh)
    header_skipped = False
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if not header_skipped:
            header_skipped = True
            try:
                [float(cell) for cell in row]
            except ValueError:
                continue  # header row
        try:
            yield lineno, [float(cell) for cell in row]
        except ValueError as exc:
            raise ObservationError(f"line {lineno}: non-numeric cell ({exc})") from None


def _parse_jsonl(fh) -> Iterator[tuple[int, list[float]]]:
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ObservationError(f"line {lineno}: invalid JSON ({exc})") from None
        if not isinstance(record, list):
            raise ObservationError(f"line {lineno}: expected a JSON array of numbers")
        try:
            yield lineno, [float(v) for v in record]
        except (TypeError, ValueError):
            raise ObservationError(f"line {lineno}: non-numeric entry in array") from None


def ingest(source, fmt: str | None = None) -> Iterator[np.ndarray]:
    """Yield validated observations from a path, file object, or '-' (stdin).

    The first record fixes the dimension; ragged rows, non-numeric cells, and
    non-finite values raise ObservationError naming the offending line.
    """
    if fmt is None:
        fmt = sniff_format(source)
    fh, close = _open_source(source)
    try:
        rows = _parse_csv(fh) if fmt == "csv" else _parse_jsonl(fh)
        dim = None
        for lineno, values in rows:
            if not values:
                raise ObservationError(f"line {lineno}: empty observation")
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise ObservationError(
                    f"line {lineno}: expected {dim} values, got {len(values)}"
                )
            if not all(math.isfinite(v) for v in values):
                raise ObservationError(f"line {lineno}: non-finite value")
            yield np.asarray(values, dtype=np.float64)
    finally:
        if close:
            fh.close()


def read_block(source, fmt: str | None = None) -> np.ndarray:
    """Read an entire source into an (m, d) block."""
    rows = list(ingest(source, fmt=fmt))
    if not rows:
        raise ObservationError("no observations in input")
    return np.asarray(rows)


def write_csv(observations: Iterable, dest) -> None:
    """Write observations as plain numeric CSV (no header)."""
    own = isinstance(dest, (str, os.PathLike))
    fh = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(fh, lineterminator="\n")
        for obs in observations:
            writer.writerow([repr(float(v)) for v in np.asarray(obs).ravel()])
    finally:
        if own:
            fh.close()


def write_jsonl(observations: Iterable, dest) -> None:
    """Write observations as JSON-lines, one array per line."""
    own = isinstance(dest, (str, os.PathLike))
    fh = open(dest, "w", encoding="utf-8") if own else dest
    try:
        for obs in observations:
            fh.write(json.dumps([float(v) for v in np.asarray(obs).ravel()]))
            fh.write("\n")
    finally:
        if own:
            fh.close()
