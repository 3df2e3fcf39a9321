"""Deterministic CSV emission and ingestion.

Every file starts with one '#' comment line recording the schema/tool
version and the run parameters, then a header row, then data. Floats are
written with repr (shortest round-trip form), so identical runs produce
byte-identical files and reading back loses nothing.
"""

from __future__ import annotations

import os

import numpy as np


def fmt(value) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, comment: str, header: list[str], rows) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {comment}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def read_csv(path: str) -> tuple[list[str], list[str], list[dict[str, str]]]:
    """Returns (comment lines, header, rows as dicts of raw strings)."""
    comments: list[str] = []
    header: list[str] | None = None
    rows: list[dict[str, str]] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line)
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                continue
            rows.append(dict(zip(header, cells)))
    if header is None:
        raise ValueError(f"{path}: no header row")
    return comments, header, rows
