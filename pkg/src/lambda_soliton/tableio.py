"""CSV emission with atomic writes and sidecar metadata files.

Output contract: header row first, '.' decimal point, complex values split
into re/im columns by the caller, LF line endings, UTF-8.  Floats use repr
(shortest round-trip form) so identical data gives identical bytes.  Metadata
never goes inline: it lives in a JSON sidecar next to the file.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename into place."""
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


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """RFC-4180-style CSV; raises ValueError on an empty header."""
    header = list(header)
    if not header:
        raise ValueError("CSV header must be nonempty")
    lines = [",".join(header)]
    for row in rows:
        cells = [format_cell(v) for v in row]
        if len(cells) != len(header):
            raise ValueError(f"row width {len(cells)} != header width {len(header)}")
        lines.append(",".join(cells))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def write_sidecar_meta(path, metadata: dict) -> None:
    """JSON metadata next to an output file, as <name>.meta."""
    target = Path(str(path) + ".meta")
    atomic_write_text(target, json.dumps(metadata, indent=2, sort_keys=True) + "\n")
