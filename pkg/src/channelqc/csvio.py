"""CSV helpers shared by all exporters.

Every artifact written by the toolkit starts with a ``# manifest_hash:`` comment
line so downstream commands can verify that mixed inputs come from the same run.
Readers skip comment lines transparently.
"""

from __future__ import annotations

import csv
import io
import os
from typing import Iterable, Sequence


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips the float."""
    return repr(float(x))


def format_bool(b: bool) -> str:
    return "true" if b else "false"


def parse_bool(s: str) -> bool:
    if s == "true":
        return True
    if s == "false":
        return False
    raise ValueError(f"not a boolean field: {s!r}")


def manifest_comment(manifest_hash: str | None, parent_hash: str | None = None) -> str | None:
    if manifest_hash is None:
        return None
    line = f"# manifest_hash: {manifest_hash}"
    if parent_hash is not None:
        line += f" parent: {parent_hash}"
    return line


def write_csv(
    path: str | os.PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence[str]],
    manifest_hash: str | None = None,
    parent_hash: str | None = None,
) -> None:
    with open(path, "w", newline="") as fh:
        comment = manifest_comment(manifest_hash, parent_hash)
        if comment:
            fh.write(comment + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path: str | os.PathLike, expected_header: Sequence[str] | None = None):
    """Return (header, rows, manifest_hash, parent_hash); comments are stripped."""
    manifest_hash = None
    parent_hash = None
    data_lines = []
    with open(path, "r", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) >= 2 and parts[0] == "manifest_hash:":
                    manifest_hash = parts[1]
                    if len(parts) >= 4 and parts[2] == "parent:":
                        parent_hash = parts[3]
                continue
            data_lines.append(line)
    reader = csv.reader(io.StringIO("".join(data_lines)))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError(f"{path}: empty CSV (missing header row)")
    if expected_header is not None and list(header) != list(expected_header):
        raise ValueError(
            f"{path}: unexpected header {header!r}, expected {list(expected_header)!r}"
        )
    return header, list(reader), manifest_hash, parent_hash
